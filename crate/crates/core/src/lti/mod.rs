//! Discrete-time LTI primitives.
//!
//! Transfer functions are kept in `z⁻¹` polynomial form with an explicit integer
//! pure delay, so that long transport delays stay exact instead of being folded
//! into high-order polynomials. Frequencies are given in Hz at every public
//! boundary; [`rad_per_sample`] is the single place where they become angles.

mod coeff;
mod delay;
mod fir;
mod frf;
pub mod poly;

pub use coeff::{read_fir_file, read_tf_file, write_fir_file, write_tf_file};
pub use delay::{delay_line_step, DelayLine};
pub use fir::{apply_fir_zero_phase, FirKernel};
pub use frf::FrequencyResponse;

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Relative slack when comparing a frequency against Nyquist.
const NYQUIST_SLACK: f64 = 1e-12;
/// Below this magnitude a denominator is considered singular.
const SINGULAR_DENOMINATOR: f64 = 1e-14;

pub fn nyquist_hz(sample_time: f64) -> f64 {
    0.5 / sample_time
}

/// Angle per sample, `ω = 2π·f·Ts`.
pub fn rad_per_sample(frequency_hz: f64, sample_time: f64) -> f64 {
    2.0 * std::f64::consts::PI * frequency_hz * sample_time
}

/// `e^{-iω}`, the value of `z⁻¹` on the unit circle.
pub fn unit_zinv(frequency_hz: f64, sample_time: f64) -> Complex64 {
    Complex64::from_polar(1.0, -rad_per_sample(frequency_hz, sample_time))
}

pub(crate) fn check_frequency(frequency_hz: f64, sample_time: f64) -> Result<()> {
    let nyq = nyquist_hz(sample_time);
    if !frequency_hz.is_finite() || frequency_hz < 0.0 {
        return Err(Error::Domain(format!("frequency {frequency_hz} Hz is not in [0, Nyquist]")));
    }
    if frequency_hz > nyq * (1.0 + NYQUIST_SLACK) {
        return Err(Error::Domain(format!(
            "frequency {frequency_hz} Hz exceeds Nyquist {nyq} Hz"
        )));
    }
    Ok(())
}

/// Rational transfer function `z^{-pure_delay} · num(z⁻¹) / den(z⁻¹)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTransferFunction {
    numerator: Vec<f64>,
    denominator: Vec<f64>,
    pure_delay: usize,
    sample_time: f64,
}

impl DiscreteTransferFunction {
    /// Builds a transfer function and scales both polynomials so that the
    /// denominator's leading coefficient is 1.
    pub fn new(
        numerator: Vec<f64>,
        denominator: Vec<f64>,
        pure_delay: usize,
        sample_time: f64,
    ) -> Result<Self> {
        if !(sample_time > 0.0 && sample_time.is_finite()) {
            return Err(Error::Config(format!("sample time must be positive, got {sample_time}")));
        }
        if numerator.is_empty() || denominator.is_empty() {
            return Err(Error::Config("empty coefficient sequence".into()));
        }
        if numerator.iter().chain(&denominator).any(|c| !c.is_finite()) {
            return Err(Error::Numeric("non-finite transfer function coefficient".into()));
        }
        let lead = denominator[0];
        if lead == 0.0 {
            return Err(Error::Config(
                "denominator leading coefficient is zero (non-causal)".into(),
            ));
        }
        let numerator = poly::trim_trailing(numerator.into_iter().map(|c| c / lead).collect());
        let denominator = poly::trim_trailing(denominator.into_iter().map(|c| c / lead).collect());
        Ok(Self { numerator, denominator, pure_delay, sample_time })
    }

    pub fn gain(gain: f64, sample_time: f64) -> Result<Self> {
        Self::new(vec![gain], vec![1.0], 0, sample_time)
    }

    pub fn unity(sample_time: f64) -> Result<Self> {
        Self::gain(1.0, sample_time)
    }

    pub fn delay(samples: usize, sample_time: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![1.0], samples, sample_time)
    }

    pub fn numerator(&self) -> &[f64] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    pub fn pure_delay(&self) -> usize {
        self.pure_delay
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn with_pure_delay(mut self, pure_delay: usize) -> Self {
        self.pure_delay = pure_delay;
        self
    }

    /// Complex response at one frequency in `[0, Nyquist]`.
    pub fn response_at(&self, frequency_hz: f64) -> Result<Complex64> {
        check_frequency(frequency_hz, self.sample_time)?;
        let zinv = unit_zinv(frequency_hz, self.sample_time);
        let den = poly::eval(&self.denominator, zinv);
        if den.norm() < SINGULAR_DENOMINATOR {
            return Err(Error::Singularity { frequency_hz });
        }
        let delay = Complex64::from_polar(
            1.0,
            -rad_per_sample(frequency_hz, self.sample_time) * self.pure_delay as f64,
        );
        Ok(poly::eval(&self.numerator, zinv) / den * delay)
    }

    pub fn dc_gain(&self) -> Result<f64> {
        Ok(self.response_at(0.0)?.re)
    }

    pub fn poles(&self) -> Vec<Complex64> {
        poly::roots_in_z(&self.denominator)
    }

    /// Zeros of the numerator polynomial. Leading zero coefficients (extra
    /// delay) are skipped.
    pub fn zeros(&self) -> Vec<Complex64> {
        match self.numerator.iter().position(|&c| c != 0.0) {
            Some(first) => poly::roots_in_z(&self.numerator[first..]),
            None => Vec::new(),
        }
    }

    /// All poles strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    /// Cascade `self · other`.
    pub fn series(&self, other: &Self) -> Result<Self> {
        Self::new(
            poly::convolve(&self.numerator, &other.numerator),
            poly::convolve(&self.denominator, &other.denominator),
            self.pure_delay + other.pure_delay,
            self.sample_time,
        )
    }
}

/// Samples `tf` on a frequency grid (all points in `(0, Nyquist]`).
pub fn evaluate(
    tf: &DiscreteTransferFunction,
    frequencies_hz: &[f64],
) -> Result<FrequencyResponse> {
    let values = frequencies_hz
        .iter()
        .map(|&f| {
            if f <= 0.0 {
                return Err(Error::Domain(format!("frequency {f} Hz is not positive")));
            }
            tf.response_at(f)
        })
        .collect::<Result<Vec<_>>>()?;
    FrequencyResponse::new(frequencies_hz.to_vec(), values, tf.sample_time())
}

/// Streaming realization of a [`DiscreteTransferFunction`] (transposed direct
/// form II behind a FIFO for the pure delay).
#[derive(Debug, Clone)]
pub struct TfFilter {
    b: Vec<f64>,
    a: Vec<f64>,
    state: Vec<f64>,
    delay: Option<DelayLine>,
    unstable: bool,
}

impl TfFilter {
    pub fn new(tf: &DiscreteTransferFunction) -> Self {
        let order = tf.numerator.len().max(tf.denominator.len());
        let mut b = tf.numerator.clone();
        let mut a = tf.denominator.clone();
        b.resize(order, 0.0);
        a.resize(order, 0.0);
        let unstable = !tf.is_stable();
        // integrators sit on the unit circle on purpose
        if tf.poles().iter().any(|p| p.norm() > 1.0 + 1e-9) {
            log::warn!("filtering with an unstable denominator; output may diverge");
        }
        let delay = (tf.pure_delay > 0).then(|| {
            DelayLine::new(tf.pure_delay).expect("positive capacity")
        });
        Self { b, a, state: vec![0.0; order - 1], delay, unstable }
    }

    /// Replaces the internal recursion state (length `max(len num, len den) - 1`).
    pub fn with_state(mut self, state: &[f64]) -> Result<Self> {
        if state.len() != self.state.len() {
            return Err(Error::Config(format!(
                "initial state has length {}, filter expects {}",
                state.len(),
                self.state.len()
            )));
        }
        self.state.copy_from_slice(state);
        Ok(self)
    }

    /// Whether the denominator has poles on or outside the unit circle.
    pub fn denominator_unstable(&self) -> bool {
        self.unstable
    }

    pub fn step(&mut self, input: f64) -> f64 {
        let x = match self.delay.as_mut() {
            Some(line) => line.step(input),
            None => input,
        };
        let n = self.state.len();
        let y = self.b[0] * x + if n > 0 { self.state[0] } else { 0.0 };
        for i in 0..n {
            let next = if i + 1 < n { self.state[i + 1] } else { 0.0 };
            self.state[i] = next + self.b[i + 1] * x - self.a[i + 1] * y;
        }
        y
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = 0.0);
        if let Some(line) = self.delay.as_mut() {
            line.clear();
        }
    }
}

/// Filters a whole sequence, zero initial state unless one is supplied.
pub fn filter_stream(
    tf: &DiscreteTransferFunction,
    input: &[f64],
    initial_state: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let mut filter = TfFilter::new(tf);
    if let Some(state) = initial_state {
        filter = filter.with_state(state)?;
    }
    Ok(input.iter().map(|&x| filter.step(x)).collect())
}
