use super::{compare_runs, run_experiment, BreathLog, Comparison, ControllerMode, ExperimentSpec};
use crate::control::{integral_controller, DEFAULT_INTEGRAL_GAIN};
use crate::error::{Error, Result};
use crate::lti::{FirKernel, FrequencyResponse};
use crate::plant::{reference_profile, Plant, ScenarioConfig};
use crate::rc_design::{check_stability, design_filters, DesignConfig, DesignOutcome, StabilityReport};
use crate::sysid::{average_frf, estimate_frf, MultisineSpec};

/// Operating pressure for identification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Peep,
    Ipap,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Peep => "peep",
            Level::Ipap => "ipap",
        }
    }

    pub fn pressure(self, scenario: &ScenarioConfig) -> f64 {
        match self {
            Level::Peep => scenario.patient.peep,
            Level::Ipap => scenario.patient.ipap,
        }
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "peep" => Ok(Self::Peep),
            "ipap" => Ok(Self::Ipap),
            other => Err(Error::Config(format!("unknown level `{other}` (peep|ipap)"))),
        }
    }
}

/// Identifies the benchmark loop of one scenario at one pressure level.
pub fn identify_scenario(
    scenario: &ScenarioConfig,
    level: Level,
    excitation: &MultisineSpec,
    sensor_noise: f64,
    noise_seed: u64,
) -> Result<FrequencyResponse> {
    let ts = scenario.circuit.sample_time;
    let mut plant = Plant::from_config(scenario)?.with_sensor_noise(sensor_noise, noise_seed)?;
    let controller = integral_controller(DEFAULT_INTEGRAL_GAIN, ts)?;
    estimate_frf(&mut plant, &controller, level.pressure(scenario), excitation)
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub scenarios: Vec<ScenarioConfig>,
    pub excitation: MultisineSpec,
    /// sensor noise σ during identification (mbar)
    pub identification_noise: f64,
    pub design: DesignConfig,
    pub breaths: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let ts = crate::control::DEFAULT_SAMPLE_TIME;
        Self {
            scenarios: ScenarioConfig::canonical(),
            excitation: MultisineSpec::full_band(ts),
            identification_noise: 0.005,
            design: DesignConfig::default(),
            breaths: 20,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRuns {
    pub pid: BreathLog,
    pub rc: BreathLog,
    pub comparison: Comparison,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    /// `(scenario_level, FRF)` for every scenario and level
    pub frfs: Vec<(String, FrequencyResponse)>,
    pub mean_frf: FrequencyResponse,
    pub design: DesignOutcome,
    /// same `L`, no robustness filter
    pub unfiltered_report: StabilityReport,
    /// empty when the design did not meet the margin
    pub runs: Vec<ScenarioRuns>,
}

impl PipelineResult {
    pub fn design_accepted(&self, min_margin: f64) -> bool {
        self.design.meets(min_margin)
    }
}

/// Identify ×(2 per scenario) → average → fit → design → check → run PID and RC.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineResult> {
    let mut frfs = Vec::new();
    for (i, scenario) in config.scenarios.iter().enumerate() {
        for (j, level) in [Level::Peep, Level::Ipap].into_iter().enumerate() {
            let seed = config.seed.wrapping_add((2 * i + j) as u64);
            let frf = identify_scenario(scenario, level, &config.excitation, config.identification_noise, seed)?;
            log::info!("identified {} at {}", scenario.patient.name, level.as_str());
            frfs.push((format!("{}_{}", scenario.patient.name, level.as_str()), frf));
        }
    }
    let mean_frf = average_frf(&frfs.iter().map(|(_, f)| f.clone()).collect::<Vec<_>>())?;
    let design = design_filters(&frfs, &mean_frf, &config.design)?;
    let fs = &design.filterset;
    let unfiltered_report = check_stability(&FirKernel::identity(), &fs.l_causal, fs.l_shift, &frfs)?;
    log::info!("design report:\n{}", design.report.summary());

    let mut runs = Vec::new();
    if design.meets(config.design.min_margin) {
        for scenario in &config.scenarios {
            let n = reference_profile(&scenario.patient, scenario.circuit.sample_time, None)?.len();
            let filterset = fs.with_period(n)?;
            let base = ExperimentSpec {
                breaths: config.breaths,
                seed: config.seed,
                ..ExperimentSpec::new(scenario.clone(), ControllerMode::Pid, None)
            };
            let pid = run_experiment(&base)?;
            let rc = run_experiment(&ExperimentSpec { mode: ControllerMode::Rc, filterset: Some(filterset), ..base })?;
            let comparison = compare_runs(&pid, &rc)?;
            runs.push(ScenarioRuns { pid, rc, comparison });
        }
    } else {
        log::error!("design margin below {}; experiments skipped", config.design.min_margin);
    }
    Ok(PipelineResult { frfs, mean_frf, design, unfiltered_report, runs })
}
