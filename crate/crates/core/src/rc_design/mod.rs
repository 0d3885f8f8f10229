//! Learning and robustness filter synthesis for the repetitive controller.
//!
//! `L = z^{l_shift}·L_c` is a zero-phase stable inverse of the fitted loop,
//! `Q = z^{q_shift}·Q_c` a zero-phase FIR lowpass. Both advances are absorbed
//! by the memory loop, so only `l_shift + q_shift ≤ N` is required.

mod filterset;
mod pipeline;
mod stability;

pub use filterset::{read_filterset, write_filterset, RcFilterSet};
pub use pipeline::{design_filters, design_pipeline, failure_cutoff, DesignConfig, DesignOutcome, FitWeighting};
pub use stability::{
    check_stability, compute_modifying_sensitivity, learning_response, ModifyingSensitivity,
    StabilityReport,
};

use crate::error::{Error, Result};
use crate::lti::{nyquist_hz, poly, DiscreteTransferFunction, FirKernel};
use num_complex::Complex64;

/// Roots at or beyond this radius are treated as non-invertible.
const UNSTABLE_ZERO_RADIUS: f64 = 1.0 - 1e-9;
/// Allowed Gibbs overshoot of |Q| above 1 before renormalising by the peak.
const Q_OVERSHOOT_ALLOWANCE: f64 = 1e-6;

/// Zero-phase-error stable inverse of `t_fit`.
///
/// Returns the causal part `L_c` and the advance `l_shift`, so that
/// `T_fit·z^{l_shift}·L_c = |B⁻(e^{-iω})|² / B⁻(1)²` is real and equals 1 at DC.
pub fn zpetc_invert(t_fit: &DiscreteTransferFunction) -> Result<(DiscreteTransferFunction, usize)> {
    let ts = t_fit.sample_time();
    let num = t_fit.numerator();
    let lead = num
        .iter()
        .position(|&c| c != 0.0)
        .ok_or_else(|| Error::Domain("cannot invert a zero numerator".into()))?;
    let b = poly::trim_trailing(num[lead..].to_vec());

    let (unstable, _stable): (Vec<Complex64>, Vec<Complex64>) = poly::roots_in_z(&b)
        .into_iter()
        .partition(|r| r.norm() >= UNSTABLE_ZERO_RADIUS);
    let b_minus = poly::from_roots(&unstable);
    let b_minus_dc: f64 = b_minus.iter().sum();
    if b_minus_dc.abs() < 1e-12 {
        return Err(Error::Domain(
            "numerator has a zero at z = 1; DC cannot be inverted, treat it manually".into(),
        ));
    }
    let (b_plus, rem) = poly::divide(&b, &b_minus);
    let scale = b.iter().map(|c| c.abs()).fold(0.0, f64::max);
    if rem.iter().any(|r| r.abs() > 1e-8 * scale) {
        log::warn!("ZPETC factorization left a remainder of {:?}", rem);
    }
    let b_minus_rev: Vec<f64> = b_minus.iter().rev().copied().collect();
    let l_num: Vec<f64> = poly::convolve(t_fit.denominator(), &b_minus_rev)
        .into_iter()
        .map(|c| c / (b_minus_dc * b_minus_dc))
        .collect();
    let l_shift = t_fit.pure_delay() + lead + (b_minus.len() - 1);
    Ok((DiscreteTransferFunction::new(l_num, b_plus, 0, ts)?, l_shift))
}

/// Hamming-windowed sinc lowpass with `order + 1` symmetric taps and unit DC gain.
///
/// If the passband ripple pushes |Q| above 1 by more than a small allowance the
/// taps are divided by the peak instead, keeping |Q| ≤ 1 everywhere.
pub fn design_q_fir(cutoff_hz: f64, order: usize, sample_time: f64) -> Result<FirKernel> {
    let nyq = nyquist_hz(sample_time);
    if !(cutoff_hz > 0.0 && cutoff_hz < nyq) {
        return Err(Error::Domain(format!("cutoff {cutoff_hz} Hz is not in (0, {nyq}) Hz")));
    }
    if !order.is_multiple_of(2) {
        return Err(Error::Domain(format!("FIR order must be even, got {order}")));
    }
    let half = order / 2;
    let fc = cutoff_hz * sample_time;
    let mut taps = vec![0.0; order + 1];
    for j in 0..=half {
        let n = j as f64;
        let sinc = if j == 0 {
            2.0 * fc
        } else {
            (2.0 * std::f64::consts::PI * fc * n).sin() / (std::f64::consts::PI * n)
        };
        let window = if order == 0 {
            1.0
        } else {
            0.54 + 0.46 * (std::f64::consts::PI * n / half as f64).cos()
        };
        taps[half + j] = sinc * window;
        taps[half - j] = sinc * window;
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    let kernel = FirKernel::zero_phase(taps)?;

    let peak = peak_magnitude(&kernel, sample_time)?;
    if peak > 1.0 + Q_OVERSHOOT_ALLOWANCE {
        log::debug!("Q ripple peak {peak}; normalizing by the peak");
        return Ok(kernel.scaled(1.0 / peak));
    }
    Ok(kernel)
}

fn peak_magnitude(kernel: &FirKernel, sample_time: f64) -> Result<f64> {
    const POINTS: usize = 8192;
    let nyq = nyquist_hz(sample_time);
    (0..=POINTS).try_fold(0.0f64, |m, i| {
        let f = nyq * i as f64 / POINTS as f64;
        Ok(m.max(kernel.response_at(f, sample_time)?.norm()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{apply_fir_zero_phase, unit_zinv};

    fn grid() -> Vec<f64> {
        (1..=2000).map(|k| k as f64 * 0.125).collect()
    }

    fn tl(t: &DiscreteTransferFunction, f: f64) -> Complex64 {
        let (lc, shift) = zpetc_invert(t).unwrap();
        t.response_at(f).unwrap() * learning_response(&lc, shift, f).unwrap()
    }

    #[test]
    fn minimum_phase_inverse_is_exact() {
        let t = DiscreteTransferFunction::new(vec![0.5, 0.2], vec![1.0, -0.6], 0, 2e-3).unwrap();
        let (_, shift) = zpetc_invert(&t).unwrap();
        assert_eq!(shift, 0);
        for f in grid().into_iter().step_by(97) {
            assert!((tl(&t, f) - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn pure_delay_inverse() {
        let t = DiscreteTransferFunction::delay(12, 2e-3).unwrap();
        let (lc, shift) = zpetc_invert(&t).unwrap();
        assert_eq!(shift, 12);
        assert_eq!(lc.numerator(), &[1.0]);
        assert_eq!(lc.denominator(), &[1.0]);
        assert!((tl(&t, 37.0) - 1.0).norm() < 1e-12);
    }

    #[test]
    fn unstable_zero_gain_factor() {
        // B = 1 + 2 z⁻¹ has its zero at z = -2
        let t = DiscreteTransferFunction::new(vec![1.0, 2.0], vec![1.0, -0.5], 3, 2e-3).unwrap();
        let (_, shift) = zpetc_invert(&t).unwrap();
        assert_eq!(shift, 4);
        for f in grid().into_iter().step_by(53) {
            let v = tl(&t, f);
            let x = unit_zinv(f, 2e-3);
            let expect = ((x + 2.0) * (x.conj() + 2.0)).norm() / 9.0;
            assert!(v.im.abs() <= 1e-12 * v.norm());
            assert!((v.re - expect).abs() < 1e-12);
        }
        assert!((tl(&t, 1e-9) - 1.0).norm() < 1e-12);
    }

    #[test]
    fn leading_zero_counts_toward_shift() {
        let t = DiscreteTransferFunction::new(vec![0.0, 0.3, 0.1], vec![1.0, -0.2], 2, 2e-3).unwrap();
        let (_, shift) = zpetc_invert(&t).unwrap();
        assert_eq!(shift, 3);
        assert!((tl(&t, 80.0) - 1.0).norm() < 1e-12);
    }

    #[test]
    fn inversion_guards() {
        let zero = DiscreteTransferFunction::new(vec![0.0], vec![1.0], 0, 2e-3).unwrap();
        assert!(matches!(zpetc_invert(&zero), Err(Error::Domain(_))));
        let dc_zero = DiscreteTransferFunction::new(vec![1.0, -1.0], vec![1.0], 0, 2e-3).unwrap();
        assert!(matches!(zpetc_invert(&dc_zero), Err(Error::Domain(_))));
    }

    #[test]
    fn default_q_design() {
        let q = design_q_fir(23.0, 50, 2e-3).unwrap();
        assert_eq!(q.taps().len(), 51);
        assert_eq!(q.forward_shift(), 25);
        assert!(q.is_zero_phase());
        assert!((q.dc_gain() - 1.0).abs() < 1e-4);
        let at_cutoff = q.response_at(23.0, 2e-3).unwrap().norm();
        assert!((at_cutoff - 0.5).abs() < 0.02, "{at_cutoff}");
        for f in grid() {
            assert!(q.response_at(f, 2e-3).unwrap().norm() <= 1.0 + 1e-12);
        }
        // ≥ 40 dB stopband
        assert!(q.response_at(60.0, 2e-3).unwrap().norm() < 0.01);
    }

    #[test]
    fn near_nyquist_cutoff_is_near_identity() {
        let q = design_q_fir(249.9, 2, 2e-3).unwrap();
        let above: usize = grid()
            .iter()
            .filter(|&&f| q.response_at(f, 2e-3).unwrap().norm() > 0.99)
            .count();
        assert!(above > 1600, "{above}");
    }

    #[test]
    fn constant_passes_through_q() {
        let q = design_q_fir(23.0, 50, 2e-3).unwrap();
        let y = apply_fir_zero_phase(&q, &[3.0; 200], Some(200)).unwrap();
        let g = q.dc_gain();
        assert!(y.iter().all(|v| (v - 3.0 * g).abs() < 1e-12));
        assert!((g - 1.0).abs() < 1e-4);
    }

    #[test]
    fn q_design_guards() {
        assert!(design_q_fir(0.0, 50, 2e-3).is_err());
        assert!(design_q_fir(250.0, 50, 2e-3).is_err());
        assert!(design_q_fir(23.0, 51, 2e-3).is_err());
    }
}
