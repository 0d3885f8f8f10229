use super::{check_frequency, poly, rad_per_sample, unit_zinv};
use crate::error::{Error, Result};
use num_complex::Complex64;

/// FIR filter realized as `z^{forward_shift} · Σ taps[j] z^{-j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirKernel {
    taps: Vec<f64>,
    forward_shift: usize,
    zero_phase: bool,
}

impl FirKernel {
    pub fn new(taps: Vec<f64>, forward_shift: usize) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Config("FIR kernel needs at least one tap".into()));
        }
        if forward_shift > taps.len() {
            return Err(Error::Config(format!(
                "forward shift {forward_shift} exceeds tap count {}",
                taps.len()
            )));
        }
        Ok(Self { taps, forward_shift, zero_phase: false })
    }

    /// Kernel whose taps are symmetric about `forward_shift`, so that its
    /// response is real on the whole unit circle.
    pub fn zero_phase(taps: Vec<f64>) -> Result<Self> {
        if taps.len().is_multiple_of(2) {
            return Err(Error::Config("zero-phase kernel needs an odd tap count".into()));
        }
        let n = taps.len();
        let scale = taps.iter().fold(0.0f64, |m, t| m.max(t.abs())).max(f64::MIN_POSITIVE);
        if (0..n / 2).any(|j| (taps[j] - taps[n - 1 - j]).abs() > 1e-12 * scale) {
            return Err(Error::Config("zero-phase kernel taps are not symmetric".into()));
        }
        let mut k = Self::new(taps, n / 2)?;
        k.zero_phase = true;
        Ok(k)
    }

    /// The identity kernel, `Q = 1`.
    pub fn identity() -> Self {
        Self { taps: vec![1.0], forward_shift: 0, zero_phase: true }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn forward_shift(&self) -> usize {
        self.forward_shift
    }

    pub fn is_zero_phase(&self) -> bool {
        self.zero_phase
    }

    pub fn dc_gain(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Response at `frequency_hz`, including the forward shift.
    pub fn response_at(&self, frequency_hz: f64, sample_time: f64) -> Result<Complex64> {
        check_frequency(frequency_hz, sample_time)?;
        let w = rad_per_sample(frequency_hz, sample_time);
        if self.zero_phase {
            // symmetric taps: h[c] + 2 Σ h[c+j] cos(jω), real by construction
            let c = self.forward_shift;
            let re = self.taps[c]
                + (1..=c).map(|j| 2.0 * self.taps[c + j] * (j as f64 * w).cos()).sum::<f64>();
            return Ok(Complex64::new(re, 0.0));
        }
        let causal = poly::eval(&self.taps, unit_zinv(frequency_hz, sample_time));
        Ok(causal * Complex64::from_polar(1.0, w * self.forward_shift as f64))
    }

    /// Response of the causal part `Σ taps[j] z^{-j}` only.
    pub fn causal_response_at(&self, frequency_hz: f64, sample_time: f64) -> Result<Complex64> {
        check_frequency(frequency_hz, sample_time)?;
        Ok(poly::eval(&self.taps, unit_zinv(frequency_hz, sample_time)))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            taps: self.taps.iter().map(|t| t * factor).collect(),
            ..self.clone()
        }
    }
}

/// `y[k] = Σ_j taps[j] · x[k - j + forward_shift]`. Without `wrap_length`
/// samples outside the input are zero; with it, indices wrap modulo the period.
pub fn apply_fir_zero_phase(
    kernel: &FirKernel,
    input: &[f64],
    wrap_length: Option<usize>,
) -> Result<Vec<f64>> {
    let n = input.len();
    let shift = kernel.forward_shift as isize;
    if let Some(period) = wrap_length {
        if period != n {
            return Err(Error::Config(format!(
                "input length {n} differs from wrap length {period}"
            )));
        }
    }
    let mut out = vec![0.0; n];
    for (k, y) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &h) in kernel.taps.iter().enumerate() {
            let idx = k as isize - j as isize + shift;
            let sample = match wrap_length {
                Some(period) if period > 0 => input[idx.rem_euclid(period as isize) as usize],
                _ if idx >= 0 && (idx as usize) < n => input[idx as usize],
                _ => 0.0,
            };
            acc += h * sample;
        }
        *y = acc;
    }
    Ok(out)
}
