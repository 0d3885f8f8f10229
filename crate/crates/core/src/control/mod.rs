//! Sample-by-sample controllers: the integral benchmark and the add-on
//! repetitive controller, wired as `e → C(e + R·e) → plant`.

use crate::error::{Error, Result};
use crate::lti::{poly, DelayLine, DiscreteTransferFunction, TfFilter};
use crate::rc_design::RcFilterSet;

/// Per-sample gain of the benchmark `C(z) = Ki / (z − 1)`.
pub const DEFAULT_INTEGRAL_GAIN: f64 = 0.01257;
pub const DEFAULT_SAMPLE_TIME: f64 = 2e-3;
/// Optional actuator range in mbar.
pub const DEFAULT_OUTPUT_LIMITS: (f64, f64) = (0.0, 80.0);
/// RC output magnitude treated as numeric overflow.
const RC_FAULT_LEVEL: f64 = 1e6;

/// `Ki·z⁻¹ / (1 − z⁻¹)`.
pub fn integral_controller(integral_gain: f64, sample_time: f64) -> Result<DiscreteTransferFunction> {
    DiscreteTransferFunction::new(vec![0.0, integral_gain], vec![1.0, -1.0], 0, sample_time)
}

/// Discrete integrator whose output lags its input by one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PidController {
    integral_gain: f64,
    output: f64,
    limits: Option<(f64, f64)>,
    saturated: bool,
}

impl PidController {
    pub fn new(integral_gain: f64) -> Self {
        Self { integral_gain, output: 0.0, limits: None, saturated: false }
    }

    pub fn with_limits(mut self, limits: Option<(f64, f64)>) -> Self {
        self.limits = limits;
        self
    }

    /// Command to apply now.
    pub fn output(&self) -> f64 {
        self.output
    }

    /// Whether the last update was clamped (integration held).
    pub fn saturated(&self) -> bool {
        self.saturated
    }

    /// `u(k+1) = u(k) + Ki·x(k)`; returns `u(k+1)`.
    pub fn step(&mut self, input: f64) -> f64 {
        let next = self.output + self.integral_gain * input;
        self.saturated = false;
        self.output = match self.limits {
            Some((lo, hi)) if next < lo || next > hi => {
                self.saturated = true;
                // hold: keep the clamped value, do not integrate further
                next.clamp(lo, hi)
            }
            _ => next,
        };
        self.output
    }

    pub fn reset(&mut self) {
        self.output = 0.0;
        self.saturated = false;
    }
}

/// Free-function form of [`PidController::step`].
pub fn pid_step(state: &mut PidController, error: f64) -> f64 {
    state.step(error)
}

/// Memory loop realizing `R = L z^{-N} Q (1 − z^{-N} Q)⁻¹` with the advances
/// of `L` and `Q` taken out of the N-sample delay.
#[derive(Debug, Clone)]
pub struct RcRuntime {
    filterset: RcFilterSet,
    memory: DelayLine,
    /// remaining `l_shift` samples between `Q_c` and the loop sum
    tail: Option<DelayLine>,
    q_filter: TfFilter,
    l_filter: TfFilter,
    fault: bool,
    samples: u64,
}

impl RcRuntime {
    pub fn new(filterset: &RcFilterSet) -> Result<Self> {
        filterset.validate()?;
        let ts = filterset.sample_time();
        let q_causal = DiscreteTransferFunction::new(filterset.q_kernel.taps().to_vec(), vec![1.0], 0, ts)?;
        let l_filter = TfFilter::new(&filterset.l_causal);
        if l_filter.denominator_unstable() {
            return Err(Error::Config("L_c is unstable".into()));
        }
        Ok(Self {
            memory: DelayLine::new(filterset.memory_length())?,
            tail: (filterset.l_shift > 0).then(|| DelayLine::new(filterset.l_shift)).transpose()?,
            q_filter: TfFilter::new(&q_causal),
            l_filter,
            filterset: filterset.clone(),
            fault: false,
            samples: 0,
        })
    }

    pub fn filterset(&self) -> &RcFilterSet {
        &self.filterset
    }

    pub fn faulted(&self) -> bool {
        self.fault
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// RC correction for the current error sample.
    pub fn step(&mut self, error: f64) -> f64 {
        self.samples += 1;
        if self.fault {
            return 0.0;
        }
        let recalled = self.memory.oldest();
        let filtered = self.q_filter.step(recalled);
        let fed_back = match &self.tail {
            Some(t) => t.oldest(),
            None => filtered,
        };
        self.memory.step(error + fed_back);
        if let Some(t) = self.tail.as_mut() {
            t.step(filtered);
        }
        let out = self.l_filter.step(filtered);
        if !out.is_finite() || out.abs() > RC_FAULT_LEVEL {
            log::error!("repetitive controller overflow after {} samples; disabled", self.samples);
            self.fault = true;
            return 0.0;
        }
        out
    }

    pub fn reset(&mut self) {
        self.memory.clear();
        if let Some(t) = self.tail.as_mut() {
            t.clear();
        }
        self.q_filter.reset();
        self.l_filter.reset();
        self.fault = false;
        self.samples = 0;
    }
}

/// Free-function form of [`RcRuntime::step`].
pub fn rc_step(state: &mut RcRuntime, error: f64) -> f64 {
    state.step(error)
}

/// `R` as one rational transfer function, for offline comparison:
/// `z^{-M}·L_c·Q_c / (1 − z^{-(N − q_shift)}·Q_c)` with `M` the memory length.
pub fn rc_transfer_function(filterset: &RcFilterSet) -> Result<DiscreteTransferFunction> {
    filterset.validate()?;
    let taps = filterset.q_kernel.taps();
    let loop_delay = filterset.period_n - filterset.q_shift();
    let mut loop_den = vec![0.0; loop_delay + taps.len()];
    loop_den[0] = 1.0;
    for (j, &t) in taps.iter().enumerate() {
        loop_den[loop_delay + j] -= t;
    }
    DiscreteTransferFunction::new(
        poly::convolve(filterset.l_causal.numerator(), taps),
        poly::convolve(filterset.l_causal.denominator(), &loop_den),
        filterset.memory_length(),
        filterset.sample_time(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub integral_gain: f64,
    pub sample_time: f64,
    pub filterset: Option<RcFilterSet>,
    pub rc_enabled: bool,
    pub output_limits: Option<(f64, f64)>,
}

impl ControllerConfig {
    pub fn pid_only() -> Self {
        Self {
            integral_gain: DEFAULT_INTEGRAL_GAIN,
            sample_time: DEFAULT_SAMPLE_TIME,
            filterset: None,
            rc_enabled: false,
            output_limits: None,
        }
    }

    pub fn with_rc(filterset: RcFilterSet) -> Self {
        Self {
            sample_time: filterset.sample_time(),
            filterset: Some(filterset),
            rc_enabled: true,
            ..Self::pid_only()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rc_enabled && self.filterset.is_none() {
            return Err(Error::Config("RC enabled without a filter set".into()));
        }
        if let Some(fs) = &self.filterset {
            let ts = fs.sample_time();
            if (ts - self.sample_time).abs() > 1e-12 * self.sample_time {
                return Err(Error::Config(format!(
                    "filter set designed for Ts = {ts} s, controller runs at {} s",
                    self.sample_time
                )));
            }
        }
        if let Some((lo, hi)) = self.output_limits {
            if !(lo < hi) {
                return Err(Error::Config(format!("output limits [{lo}, {hi}] are empty")));
            }
        }
        Ok(())
    }
}

/// Integral controller with the optional repetitive add-on.
#[derive(Debug, Clone)]
pub struct Controller {
    pid: PidController,
    rc: Option<RcRuntime>,
    rc_enabled: bool,
}

impl Controller {
    pub fn new(config: &ControllerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            pid: PidController::new(config.integral_gain).with_limits(config.output_limits),
            rc: config.filterset.as_ref().map(RcRuntime::new).transpose()?,
            rc_enabled: config.rc_enabled,
        })
    }

    /// Command to apply at the current sample.
    pub fn command(&self) -> f64 {
        self.pid.output()
    }

    pub fn rc(&self) -> Option<&RcRuntime> {
        self.rc.as_ref()
    }

    pub fn pid(&self) -> &PidController {
        &self.pid
    }

    /// Consumes the current reference and measurement and returns the command
    /// for the next sample.
    pub fn step(&mut self, reference: f64, measurement: f64) -> f64 {
        let error = reference - measurement;
        let input = match (&mut self.rc, self.rc_enabled) {
            (Some(rc), true) => error + rc.step(error),
            _ => error,
        };
        self.pid.step(input)
    }

    pub fn reset(&mut self) {
        self.pid.reset();
        if let Some(rc) = self.rc.as_mut() {
            rc.reset();
        }
    }
}

/// Free-function form of [`Controller::step`].
pub fn controller_step(state: &mut Controller, reference: f64, measurement: f64) -> f64 {
    state.step(reference, measurement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{filter_stream, FirKernel};
    use crate::rc_design::design_q_fir;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_set(n: usize) -> RcFilterSet {
        RcFilterSet::new(
            DiscreteTransferFunction::unity(2e-3).unwrap(),
            0,
            FirKernel::identity(),
            n,
        )
        .unwrap()
    }

    #[test]
    fn integrator_recursion() {
        let mut c = PidController::new(DEFAULT_INTEGRAL_GAIN);
        assert_eq!(c.output(), 0.0);
        for k in 1..=10 {
            let u = c.step(1.0);
            assert!((u - k as f64 * 0.01257).abs() < 1e-15);
        }
        let mut frozen = PidController::new(DEFAULT_INTEGRAL_GAIN);
        assert!((0..50).all(|_| frozen.step(0.0) == 0.0));
    }

    #[test]
    fn integrator_is_odd() {
        let mut a = PidController::new(DEFAULT_INTEGRAL_GAIN);
        let mut b = PidController::new(DEFAULT_INTEGRAL_GAIN);
        for k in 0..20 {
            let e = (k as f64).sin();
            assert_eq!(a.step(e), -b.step(-e));
        }
    }

    #[test]
    fn saturation_holds_integration() {
        let mut c = PidController::new(1.0).with_limits(Some((0.0, 80.0)));
        for _ in 0..100 {
            c.step(10.0);
        }
        assert_eq!(c.output(), 80.0);
        assert!(c.saturated());
        // unwinds immediately, no accumulated excess
        assert_eq!(c.step(-1.0), 79.0);
        assert!(!c.saturated());
    }

    #[test]
    fn impulse_repeats_every_period() {
        let mut rc = RcRuntime::new(&unit_set(4)).unwrap();
        let out: Vec<f64> = (0..16).map(|k| rc.step(if k == 0 { 1.0 } else { 0.0 })).collect();
        for (k, v) in out.iter().enumerate() {
            let expect = if k > 0 && k % 4 == 0 { 1.0 } else { 0.0 };
            assert_eq!(*v, expect, "k = {k}");
        }
    }

    #[test]
    fn zero_error_gives_zero_output() {
        let set = unit_set(50).with_period(50).unwrap();
        let mut rc = RcRuntime::new(&set).unwrap();
        assert!((0..500).all(|_| rc.step(0.0) == 0.0));
    }

    fn realistic_set(n: usize) -> RcFilterSet {
        let lc = DiscreteTransferFunction::new(
            vec![14.0, -25.0, 12.5, -0.4],
            vec![1.0, 0.35],
            0,
            2e-3,
        )
        .unwrap();
        RcFilterSet::new(lc, 13, design_q_fir(23.0, 50, 2e-3).unwrap(), n).unwrap()
    }

    #[test]
    fn silent_during_first_memory_length() {
        let set = realistic_set(200);
        let mut rc = RcRuntime::new(&set).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 0..set.memory_length() {
            assert_eq!(rc.step(rng.random::<f64>() - 0.5), 0.0, "k = {k}");
        }
        assert_ne!(rc.step(1.0), 0.0);
    }

    #[test]
    fn streaming_matches_rational_r() {
        let set = realistic_set(200);
        let mut rc = RcRuntime::new(&set).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let input: Vec<f64> = (0..10 * set.period_n).map(|_| rng.random::<f64>() - 0.5).collect();
        let streamed: Vec<f64> = input.iter().map(|&e| rc.step(e)).collect();
        let offline = filter_stream(&rc_transfer_function(&set).unwrap(), &input, None).unwrap();
        let rms = (streamed.iter().zip(&offline).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            / input.len() as f64)
            .sqrt();
        assert!(rms < 1e-8, "{rms}");
    }

    #[test]
    fn overflow_disables_rc() {
        // |Q| = 2 makes the memory loop explode
        let set = RcFilterSet::new(
            DiscreteTransferFunction::unity(2e-3).unwrap(),
            0,
            FirKernel::identity().scaled(2.0),
            10,
        )
        .unwrap();
        let mut rc = RcRuntime::new(&set).unwrap();
        let mut last = 0.0;
        for k in 0..2000 {
            last = rc.step(if k == 0 { 1.0 } else { 0.0 });
        }
        assert!(rc.faulted());
        assert_eq!(last, 0.0);
    }

    #[test]
    fn disabled_rc_is_bit_identical_to_pid() {
        let mut cfg = ControllerConfig::with_rc(realistic_set(300));
        cfg.rc_enabled = false;
        let mut with = Controller::new(&cfg).unwrap();
        let mut without = Controller::new(&ControllerConfig::pid_only()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..3000 {
            let (r, y) = (rng.random::<f64>() * 20.0, rng.random::<f64>() * 20.0);
            assert_eq!(with.step(r, y).to_bits(), without.step(r, y).to_bits());
        }
    }

    #[test]
    fn zero_signals_freeze_command() {
        let mut c = Controller::new(&ControllerConfig::with_rc(realistic_set(300))).unwrap();
        assert!((0..1000).all(|_| c.step(0.0, 0.0) == 0.0));
    }

    #[test]
    fn sample_time_mismatch_rejected() {
        let mut cfg = ControllerConfig::with_rc(realistic_set(300));
        cfg.sample_time = 1e-3;
        assert!(matches!(Controller::new(&cfg), Err(Error::Config(_))));
    }
}
