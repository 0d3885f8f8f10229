//! Experiment orchestration: closed-loop runs, breath norms, comparisons and
//! the end-to-end identify → design → run pipeline.

mod pipeline;
mod report;
pub mod svg;

pub use pipeline::{identify_scenario, run_pipeline, Level, PipelineConfig, PipelineResult, ScenarioRuns};
pub use report::{emit_report, read_breath_norms, write_breath_norms, write_trace};

use crate::control::{integral_controller, Controller, ControllerConfig, DEFAULT_INTEGRAL_GAIN};
use crate::error::{Error, Result};
use crate::lti::FrequencyResponse;
use crate::plant::{closed_form_tf, reference_profile, Plant, ScenarioConfig};
use crate::rc_design::{check_stability, RcFilterSet, StabilityReport};
use crate::sysid::complementary_sensitivity;

/// Measured pressure beyond this multiple of the largest target counts as divergence.
const DIVERGENCE_FACTOR: f64 = 10.0;
/// DFT length whose bins form the stability grid (0.125 Hz spacing at 2 ms).
pub const STABILITY_GRID_PERIOD: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerMode {
    Pid,
    Rc,
}

impl ControllerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerMode::Pid => "pid",
            ControllerMode::Rc => "rc",
        }
    }
}

impl std::str::FromStr for ControllerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pid" => Ok(Self::Pid),
            "rc" | "pid+rc" => Ok(Self::Rc),
            other => Err(Error::Config(format!("unknown controller mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub mode: ControllerMode,
    pub breaths: usize,
    /// required in RC mode; its period must equal the scenario's
    pub filterset: Option<RcFilterSet>,
    pub seed: u64,
    /// measurement noise σ in mbar; 0 disables the hook
    pub sensor_noise: f64,
    pub output_limits: Option<(f64, f64)>,
    /// refuse RC runs whose filters fail the check against this scenario's model
    pub verify_stability: bool,
}

impl ExperimentSpec {
    pub fn new(scenario: ScenarioConfig, mode: ControllerMode, filterset: Option<RcFilterSet>) -> Self {
        Self {
            scenario,
            mode,
            breaths: 20,
            filterset,
            seed: 0,
            sensor_noise: 0.0,
            output_limits: None,
            verify_stability: true,
        }
    }

    pub fn period_samples(&self) -> Result<usize> {
        Ok(reference_profile(&self.scenario.patient, self.scenario.circuit.sample_time, None)?.len())
    }
}

/// Where and why a run stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub sample: usize,
    pub message: String,
}

/// Per-sample traces plus per-breath error norms.
#[derive(Debug, Clone, PartialEq)]
pub struct BreathLog {
    pub scenario: String,
    pub mode: ControllerMode,
    pub period_n: usize,
    pub sample_time: f64,
    pub reference: Vec<f64>,
    pub measured_p_aw: Vec<f64>,
    pub p_lung: Vec<f64>,
    pub q_pat: Vec<f64>,
    pub command: Vec<f64>,
    pub breath_norms: Vec<f64>,
    pub divergence: Option<Divergence>,
}

impl BreathLog {
    pub fn empty(scenario: &str, mode: ControllerMode, period_n: usize, sample_time: f64) -> Self {
        Self {
            scenario: scenario.to_string(),
            mode,
            period_n,
            sample_time,
            reference: Vec::new(),
            measured_p_aw: Vec::new(),
            p_lung: Vec::new(),
            q_pat: Vec::new(),
            command: Vec::new(),
            breath_norms: Vec::new(),
            divergence: None,
        }
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    pub fn error(&self, k: usize) -> f64 {
        self.reference[k] - self.measured_p_aw[k]
    }

    /// First sample of every breath.
    pub fn breath_boundaries(&self) -> Vec<usize> {
        (0..self.breath_norms.len()).map(|j| j * self.period_n).collect()
    }

    pub fn ensure_complete(&self) -> Result<()> {
        match &self.divergence {
            Some(d) => Err(Error::Unstable(format!(
                "{} ({}) diverged at sample {}: {}",
                self.scenario,
                self.mode.as_str(),
                d.sample,
                d.message
            ))),
            None => Ok(()),
        }
    }

    fn update_norms(&mut self) {
        let n = self.period_n;
        self.breath_norms = (0..self.len() / n)
            .map(|j| (j * n..(j + 1) * n).map(|k| self.error(k).powi(2)).sum::<f64>().sqrt())
            .collect();
    }
}

/// Checks `filterset` against the scenario's exact loop model on the full DFT grid.
pub fn verify_filterset(scenario: &ScenarioConfig, filterset: &RcFilterSet) -> Result<StabilityReport> {
    let t = analytic_complementary_sensitivity(scenario, STABILITY_GRID_PERIOD)?;
    check_stability(
        &filterset.q_kernel,
        &filterset.l_causal,
        filterset.l_shift,
        &[(scenario.patient.name.clone(), t)],
    )
}

/// `T = PC/(1+PC)` of the benchmark loop, evaluated at `k/(P·Ts)`, `k = 1..=P/2`.
pub fn analytic_complementary_sensitivity(scenario: &ScenarioConfig, dft_length: usize) -> Result<FrequencyResponse> {
    let ts = scenario.circuit.sample_time;
    let p = 2 * (dft_length / 2).max(1);
    let freqs: Vec<f64> = (1..=p / 2).map(|k| k as f64 / (p as f64 * ts)).collect();
    complementary_sensitivity(
        &closed_form_tf(&scenario.circuit, &scenario.patient)?,
        &integral_controller(DEFAULT_INTEGRAL_GAIN, ts)?,
        &freqs,
    )
}

/// Simulates `spec.breaths` breaths of the closed loop from rest.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<BreathLog> {
    if spec.breaths == 0 {
        return Err(Error::Config("at least one breath is required".into()));
    }
    let circuit = &spec.scenario.circuit;
    let ts = circuit.sample_time;
    let profile = reference_profile(&spec.scenario.patient, ts, None)?;
    let n = profile.len();

    let mut config = ControllerConfig {
        integral_gain: DEFAULT_INTEGRAL_GAIN,
        sample_time: ts,
        filterset: None,
        rc_enabled: false,
        output_limits: spec.output_limits,
    };
    if spec.mode == ControllerMode::Rc {
        let fs = spec
            .filterset
            .as_ref()
            .ok_or_else(|| Error::Config("RC mode needs a filter set".into()))?;
        if fs.period_n != n {
            return Err(Error::Config(format!(
                "filter set period {} differs from the {}-sample breath of {}",
                fs.period_n, n, spec.scenario.patient.name
            )));
        }
        if spec.verify_stability {
            let report = verify_filterset(&spec.scenario, fs)?;
            if !report.pass {
                return Err(Error::Unstable(format!(
                    "filter set fails the robust-stability check for {}\n{}",
                    spec.scenario.patient.name,
                    report.summary()
                )));
            }
        }
        config.filterset = Some(fs.clone());
        config.rc_enabled = true;
    }
    let mut controller = Controller::new(&config)?;
    let mut plant = Plant::from_config(&spec.scenario)?.with_sensor_noise(spec.sensor_noise, spec.seed)?;

    let total = spec.breaths * n;
    let peak = profile.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bound = DIVERGENCE_FACTOR * (peak + 1.0);
    let mut log = BreathLog::empty(&spec.scenario.patient.name, spec.mode, n, ts);
    for series in [&mut log.reference, &mut log.measured_p_aw, &mut log.p_lung, &mut log.q_pat, &mut log.command] {
        series.reserve(total);
    }
    for k in 0..total {
        let r = profile[k % n];
        let u = controller.command();
        let out = plant.step(u);
        let y = out.measured_p_aw;
        log.reference.push(r);
        log.measured_p_aw.push(y);
        log.p_lung.push(out.p_lung);
        log.q_pat.push(out.q_pat());
        log.command.push(u);
        if !y.is_finite() || y.abs() > bound {
            log.divergence = Some(Divergence {
                sample: k,
                message: format!("|p_aw| = {:.3e} mbar exceeds {bound:.3e}", y.abs()),
            });
            break;
        }
        controller.step(r, y);
        if controller.rc().is_some_and(|rc| rc.faulted()) {
            log.divergence = Some(Divergence { sample: k, message: "repetitive controller overflow".into() });
            break;
        }
    }
    log.update_norms();
    if let Some(d) = &log.divergence {
        log::error!("{} ({}) diverged at sample {}: {}", log.scenario, spec.mode.as_str(), d.sample, d.message);
    }
    Ok(log)
}

/// Per-breath ratios `candidate / baseline`.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub scenario: String,
    pub baseline_norms: Vec<f64>,
    pub candidate_norms: Vec<f64>,
    pub ratios: Vec<f64>,
    /// mean of the last (up to) five ratios
    pub converged_ratio: f64,
}

/// Breaths averaged for the converged ratio.
pub const CONVERGED_BREATHS: usize = 5;

pub fn compare_runs(baseline: &BreathLog, candidate: &BreathLog) -> Result<Comparison> {
    compare_norms(&baseline.scenario, &baseline.breath_norms, &candidate.breath_norms)
}

/// A zero baseline norm yields ratio 0 when the candidate is also zero and +∞ otherwise.
pub fn compare_norms(scenario: &str, baseline: &[f64], candidate: &[f64]) -> Result<Comparison> {
    if baseline.len() != candidate.len() {
        return Err(Error::Config(format!(
            "breath counts differ: {} vs {}",
            baseline.len(),
            candidate.len()
        )));
    }
    let ratios: Vec<f64> = baseline
        .iter()
        .zip(candidate)
        .map(|(&b, &c)| match (b == 0.0, c == 0.0) {
            (true, true) => 0.0,
            (true, false) => f64::INFINITY,
            _ => c / b,
        })
        .collect();
    let tail = &ratios[ratios.len().saturating_sub(CONVERGED_BREATHS)..];
    let converged_ratio = if tail.is_empty() { f64::NAN } else { tail.iter().sum::<f64>() / tail.len() as f64 };
    Ok(Comparison {
        scenario: scenario.to_string(),
        baseline_norms: baseline.to_vec(),
        candidate_norms: candidate.to_vec(),
        ratios,
        converged_ratio,
    })
}
