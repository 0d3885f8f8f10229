//! Closed-loop FRF identification and parametric fitting.

mod excitation;
mod fit;

pub use excitation::MultisineSpec;
pub use fit::{fit_rational, FitReport, RationalFit};

use crate::error::{Error, Result};
use crate::lti::{rad_per_sample, DiscreteTransferFunction, FrequencyResponse, TfFilter};
use crate::plant::Plant;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Output magnitude, relative to operating point plus excitation peak, treated as divergence.
const DIVERGENCE_FACTOR: f64 = 10.0;

/// Realizes `z·C` so the loop can compute the next command from the current error.
fn advanced_controller(controller: &DiscreteTransferFunction) -> Result<DiscreteTransferFunction> {
    let ts = controller.sample_time();
    if controller.pure_delay() > 0 {
        return Ok(controller.clone().with_pure_delay(controller.pure_delay() - 1));
    }
    let num = controller.numerator();
    if num[0] != 0.0 || num.len() < 2 {
        return Err(Error::Config(
            "controller must be strictly proper (one sample of computation delay)".into(),
        ));
    }
    DiscreteTransferFunction::new(num[1..].to_vec(), controller.denominator().to_vec(), 0, ts)
}

/// Runs the closed loop at `operating_pressure + multisine` and returns the
/// FRF from reference to measured airway pressure at the excited bins.
pub fn estimate_frf(
    plant: &mut Plant,
    controller: &DiscreteTransferFunction,
    operating_pressure: f64,
    excitation: &MultisineSpec,
) -> Result<FrequencyResponse> {
    let ts = plant.circuit().sample_time;
    if (controller.sample_time() - ts).abs() > 1e-12 * ts {
        return Err(Error::Config("controller and plant sample times differ".into()));
    }
    let period = excitation.period()?;
    let p = excitation.period_samples;
    let peak = period.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bound = DIVERGENCE_FACTOR * (operating_pressure.abs() + peak);

    plant.reset();
    let mut ctrl = TfFilter::new(&advanced_controller(controller)?);
    let mut command = 0.0;
    let mut r_acc = vec![0.0; p];
    let mut y_acc = vec![0.0; p];
    let discard = excitation.discard_periods * p;
    for k in 0..excitation.total_samples() {
        let r = operating_pressure + period[k % p];
        let y = plant.step(command).measured_p_aw;
        if !y.is_finite() || y.abs() > bound {
            return Err(Error::Identification(format!(
                "closed loop diverged at sample {k}: |p_aw| = {:.3e} exceeds {bound:.3e} mbar",
                y.abs()
            )));
        }
        command = ctrl.step(r - y);
        if k >= discard {
            r_acc[k % p] += r - operating_pressure;
            y_acc[k % p] += y;
        }
    }

    let r_spec = spectrum(&r_acc);
    let y_spec = spectrum(&y_acc);
    let values = excitation.bins.iter().map(|&b| y_spec[b] / r_spec[b]).collect();
    FrequencyResponse::new(excitation.frequencies_hz(ts), values, ts)
}

fn spectrum(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// `P·C / (1 + P·C)` on the grid.
pub fn complementary_sensitivity(
    plant: &DiscreteTransferFunction,
    controller: &DiscreteTransferFunction,
    frequencies_hz: &[f64],
) -> Result<FrequencyResponse> {
    let values = frequencies_hz
        .iter()
        .map(|&f| {
            let l = plant.response_at(f)? * controller.response_at(f)?;
            Ok(l / (1.0 + l))
        })
        .collect::<Result<Vec<_>>>()?;
    FrequencyResponse::new(frequencies_hz.to_vec(), values, plant.sample_time())
}

/// Bin-wise complex mean.
pub fn average_frf(responses: &[FrequencyResponse]) -> Result<FrequencyResponse> {
    let first = responses
        .first()
        .ok_or_else(|| Error::Config("no FRFs to average".into()))?;
    if let Some(bad) = responses.iter().position(|r| !r.same_grid(first)) {
        return Err(Error::Config(format!("FRF {bad} is on a different frequency grid")));
    }
    let n = responses.len() as f64;
    let values = (0..first.len())
        .map(|i| responses.iter().map(|r| r.values()[i]).sum::<Complex64>() / n)
        .collect();
    FrequencyResponse::new(first.frequencies_hz().to_vec(), values, first.sample_time())
}

/// Integer delay from the least-squares slope of the unwrapped phase over `band_hz`.
pub fn estimate_delay(frf: &FrequencyResponse, band_hz: (f64, f64)) -> Result<usize> {
    let sub = frf.band(band_hz.0, band_hz.1);
    if sub.len() < 3 {
        return Err(Error::Config(format!(
            "only {} bins in {:?} Hz; need at least 3",
            sub.len(),
            band_hz
        )));
    }
    let ts = sub.sample_time();
    let mut phase = Vec::with_capacity(sub.len());
    let mut prev: Option<f64> = None;
    for v in sub.values() {
        let mut ph = v.arg();
        if let Some(p) = prev {
            ph -= std::f64::consts::TAU * ((ph - p) / std::f64::consts::TAU).round();
        }
        phase.push(ph);
        prev = Some(ph);
    }
    let omega: Vec<f64> = sub.frequencies_hz().iter().map(|&f| rad_per_sample(f, ts)).collect();
    let n = omega.len() as f64;
    let mo = omega.iter().sum::<f64>() / n;
    let mp = phase.iter().sum::<f64>() / n;
    let sxy: f64 = omega.iter().zip(&phase).map(|(o, p)| (o - mo) * (p - mp)).sum();
    let sxx: f64 = omega.iter().map(|o| (o - mo).powi(2)).sum();
    let delay = (-sxy / sxx).round();
    Ok(delay.max(0.0) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::evaluate;
    use crate::plant::{closed_form_tf, ScenarioConfig};

    fn integrator(ts: f64) -> DiscreteTransferFunction {
        DiscreteTransferFunction::new(vec![0.0, 0.01257], vec![1.0, -1.0], 0, ts).unwrap()
    }

    fn grid() -> Vec<f64> {
        (1..=2000).map(|k| k as f64 * 0.125).collect()
    }

    #[test]
    fn estimate_matches_analytic_loop() {
        let cfg = &ScenarioConfig::canonical()[1];
        let mut plant = Plant::from_config(cfg).unwrap();
        let c = integrator(2e-3);
        let spec = MultisineSpec::log_spaced(2e-3);
        let est = estimate_frf(&mut plant, &c, 5.0, &spec).unwrap();
        let truth = complementary_sensitivity(&closed_form_tf(&cfg.circuit, &cfg.patient).unwrap(), &c, est.frequencies_hz()).unwrap();
        for (a, b) in est.values().iter().zip(truth.values()) {
            assert!((a.norm() / b.norm() - 1.0).abs() < 1e-6);
            assert!((a / b).arg().abs() < 1e-6);
        }
    }

    #[test]
    fn higher_gain_raises_low_frequency_tracking() {
        let cfg = &ScenarioConfig::canonical()[0];
        let p = closed_form_tf(&cfg.circuit, &cfg.patient).unwrap();
        let f = [0.25, 0.5];
        let lo = complementary_sensitivity(&p, &integrator(2e-3), &f).unwrap();
        let hi_c = DiscreteTransferFunction::new(vec![0.0, 0.02], vec![1.0, -1.0], 0, 2e-3).unwrap();
        let hi = complementary_sensitivity(&p, &hi_c, &f).unwrap();
        for (l, h) in lo.values().iter().zip(hi.values()) {
            assert!((1.0 - h).norm() < (1.0 - l).norm());
        }
    }

    #[test]
    fn error_shrinks_with_record_length() {
        let cfg = &ScenarioConfig::canonical()[2];
        let c = integrator(2e-3);
        let err = |periods| {
            let mut plant = Plant::from_config(cfg).unwrap().with_sensor_noise(0.05, 3).unwrap();
            let spec = MultisineSpec { record_periods: periods, ..MultisineSpec::log_spaced(2e-3) };
            let est = estimate_frf(&mut plant, &c, 10.0, &spec).unwrap();
            let truth = complementary_sensitivity(&closed_form_tf(&cfg.circuit, &cfg.patient).unwrap(), &c, est.frequencies_hz()).unwrap();
            est.values().iter().zip(truth.values()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
        };
        assert!(err(16) < err(2));
    }

    #[test]
    fn unstable_loop_aborts() {
        let cfg = &ScenarioConfig::canonical()[0];
        let mut plant = Plant::from_config(cfg).unwrap();
        let c = DiscreteTransferFunction::new(vec![0.0, 2.0], vec![1.0, -1.0], 0, 2e-3).unwrap();
        let r = estimate_frf(&mut plant, &c, 5.0, &MultisineSpec::log_spaced(2e-3));
        assert!(matches!(r, Err(Error::Identification(_))));
    }

    #[test]
    fn zero_amplitude_is_an_error() {
        let cfg = &ScenarioConfig::canonical()[0];
        let mut plant = Plant::from_config(cfg).unwrap();
        let spec = MultisineSpec { rms_amplitude: 0.0, ..MultisineSpec::log_spaced(2e-3) };
        assert!(estimate_frf(&mut plant, &integrator(2e-3), 5.0, &spec).is_err());
    }

    #[test]
    fn biproper_controller_is_rejected() {
        let cfg = &ScenarioConfig::canonical()[0];
        let mut plant = Plant::from_config(cfg).unwrap();
        let c = DiscreteTransferFunction::gain(0.1, 2e-3).unwrap();
        assert!(matches!(
            estimate_frf(&mut plant, &c, 5.0, &MultisineSpec::log_spaced(2e-3)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn averaging() {
        let a = Complex64::new(0.3, 0.4);
        let one = FrequencyResponse::new(vec![1.0], vec![a], 2e-3).unwrap();
        assert_eq!(average_frf(std::slice::from_ref(&one)).unwrap(), one);
        let conj = FrequencyResponse::new(vec![1.0], vec![a.conj()], 2e-3).unwrap();
        let m = average_frf(&[one.clone(), conj]).unwrap();
        assert_eq!(m.values()[0], Complex64::new(0.3, 0.0));
        let other = FrequencyResponse::new(vec![2.0], vec![a], 2e-3).unwrap();
        assert!(average_frf(&[one, other]).is_err());
    }

    #[test]
    fn averaging_six_responses_matches_hand_sum() {
        let c = integrator(2e-3);
        let f = grid();
        let frfs: Vec<_> = ScenarioConfig::canonical()
            .iter()
            .flat_map(|cfg| {
                let t = complementary_sensitivity(&closed_form_tf(&cfg.circuit, &cfg.patient).unwrap(), &c, &f).unwrap();
                [t.clone(), t.map(|_, v| v * 1.01)]
            })
            .collect();
        let m = average_frf(&frfs).unwrap();
        for i in [0, 700, 1999] {
            let hand = frfs.iter().fold(Complex64::new(0.0, 0.0), |s, r| s + r.values()[i]) / 6.0;
            assert!((m.values()[i] - hand).norm() < 1e-15);
        }
    }

    #[test]
    fn delay_estimates() {
        let ts = 2e-3;
        let pure = evaluate(&DiscreteTransferFunction::delay(12, ts).unwrap(), &grid()).unwrap();
        assert_eq!(estimate_delay(&pure, (0.1, 250.0)).unwrap(), 12);
        let unit = evaluate(&DiscreteTransferFunction::unity(ts).unwrap(), &grid()).unwrap();
        assert_eq!(estimate_delay(&unit, (0.1, 250.0)).unwrap(), 0);
        for cfg in ScenarioConfig::canonical() {
            let p = evaluate(&closed_form_tf(&cfg.circuit, &cfg.patient).unwrap(), &grid()).unwrap();
            let d = estimate_delay(&p, (100.0, 250.0)).unwrap();
            assert!((11..=13).contains(&d), "{d}");
        }
        assert!(estimate_delay(&pure, (10.0, 10.2)).is_err());
    }
}
