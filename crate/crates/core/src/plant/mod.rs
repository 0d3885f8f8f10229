//! Blower–hose–patient simulation.
//!
//! Signal chain per sample: control pressure → blower transport delay →
//! first-order blower lag → outlet pressure `p_out` → hose resistance into the
//! airway node, which splits into a leak and the patient branch (lung
//! resistance + compliance) → airway pressure `p_aw` → measurement delay.
//!
//! Both dynamic elements are discretized exactly under a zero-order hold of
//! their input, so [`closed_form_tf`] reproduces [`Plant::step`] to rounding.

mod scenario;

pub use scenario::{CircuitParameters, PatientScenario, ScenarioConfig};

use crate::error::{Error, Result};
use crate::lti::{DelayLine, DiscreteTransferFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Static solution of the airway node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirwayNode {
    pub p_aw: f64,
    pub q_out: f64,
    pub q_leak: f64,
    pub q_pat: f64,
}

impl AirwayNode {
    /// `q_out - q_leak - q_pat`
    pub fn flow_residual(&self) -> f64 {
        self.q_out - self.q_leak - self.q_pat
    }
}

/// Solves `(p_out - p_aw)/R_hose = p_aw/R_leak + (p_aw - p_lung)/R_lung`.
pub fn airway_pressure_node(
    p_out: f64,
    p_lung: f64,
    circuit: &CircuitParameters,
    patient: &PatientScenario,
) -> AirwayNode {
    let g_hose = 1.0 / circuit.r_hose;
    let g_leak = 1.0 / circuit.r_leak;
    let g_lung = 1.0 / patient.r_lung;
    let p_aw = (p_out * g_hose + p_lung * g_lung) / (g_hose + g_leak + g_lung);
    AirwayNode {
        p_aw,
        q_out: (p_out - p_aw) * g_hose,
        q_leak: p_aw * g_leak,
        q_pat: (p_aw - p_lung) * g_lung,
    }
}

/// Discrete coefficients shared by the simulator and the closed-form model.
#[derive(Debug, Clone, Copy)]
struct Discretization {
    /// blower lag pole `e^{-Ts/τ}`
    blower_pole: f64,
    /// lung pole `e^{-Ts/τ_lung}`
    lung_pole: f64,
    /// steady-state `p_lung / p_out` (hose/leak divider)
    divider: f64,
}

impl Discretization {
    fn new(circuit: &CircuitParameters, patient: &PatientScenario) -> Self {
        let ts = circuit.sample_time;
        let g_hose = 1.0 / circuit.r_hose;
        let g_leak = 1.0 / circuit.r_leak;
        let g_lung = 1.0 / patient.r_lung;
        let g_total = g_hose + g_leak + g_lung;
        // dp_lung/dt = (g_hose p_out - (g_hose + g_leak) p_lung) / (g_total R_lung C_lung)
        let tau_lung = g_total * patient.r_lung * patient.c_lung / (g_hose + g_leak);
        Self {
            blower_pole: (-ts / circuit.blower_time_constant).exp(),
            lung_pole: (-ts / tau_lung).exp(),
            divider: g_hose / (g_hose + g_leak),
        }
    }
}

/// Internal state of one simulator instance.
#[derive(Debug, Clone)]
pub struct PlantState {
    pub p_lung: f64,
    /// blower outlet pressure held by the lag
    pub blower_lag_state: f64,
    blower_queue: Option<DelayLine>,
    measurement_queue: Option<DelayLine>,
}

impl PlantState {
    pub fn zero(circuit: &CircuitParameters) -> Self {
        let queue = |n: usize| (n > 0).then(|| DelayLine::new(n).expect("positive capacity"));
        Self {
            p_lung: 0.0,
            blower_lag_state: 0.0,
            blower_queue: queue(circuit.blower_delay_samples),
            measurement_queue: queue(circuit.measurement_delay_samples),
        }
    }
}

/// Outputs of one simulation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantOutput {
    /// airway pressure as seen by the controller (after the measurement delay)
    pub measured_p_aw: f64,
    pub p_aw: f64,
    pub p_out: f64,
    pub p_lung: f64,
    pub node: AirwayNode,
}

impl PlantOutput {
    pub fn q_pat(&self) -> f64 {
        self.node.q_pat
    }
}

/// Advances `state` by one sample under control pressure `p_control`.
pub fn step(
    state: &mut PlantState,
    p_control: f64,
    circuit: &CircuitParameters,
    patient: &PatientScenario,
) -> PlantOutput {
    step_with(state, p_control, circuit, patient, &Discretization::new(circuit, patient))
}

fn step_with(
    state: &mut PlantState,
    p_control: f64,
    circuit: &CircuitParameters,
    patient: &PatientScenario,
    disc: &Discretization,
) -> PlantOutput {
    let delayed = match state.blower_queue.as_mut() {
        Some(q) => q.step(p_control),
        None => p_control,
    };
    let p_out = disc.blower_pole * state.blower_lag_state + (1.0 - disc.blower_pole) * delayed;
    state.blower_lag_state = p_out;

    let p_lung = state.p_lung;
    let node = airway_pressure_node(p_out, p_lung, circuit, patient);
    // p_out is held over the coming interval; exact one-pole update
    state.p_lung = disc.lung_pole * p_lung + (1.0 - disc.lung_pole) * disc.divider * p_out;

    let measured_p_aw = match state.measurement_queue.as_mut() {
        Some(q) => q.step(node.p_aw),
        None => node.p_aw,
    };
    PlantOutput { measured_p_aw, p_aw: node.p_aw, p_out, p_lung, node }
}

/// Owned simulator: parameters plus state.
#[derive(Debug, Clone)]
pub struct Plant {
    circuit: CircuitParameters,
    patient: PatientScenario,
    state: PlantState,
    disc: Discretization,
    noise: Option<SensorNoise>,
}

/// Seeded white Gaussian noise added to the measured airway pressure.
#[derive(Debug, Clone)]
struct SensorNoise {
    distribution: Normal<f64>,
    rng: ChaCha8Rng,
    std_dev: f64,
    seed: u64,
}

impl Plant {
    pub fn new(circuit: CircuitParameters, patient: PatientScenario) -> Result<Self> {
        circuit.validate()?;
        patient.validate()?;
        let disc = Discretization::new(&circuit, &patient);
        Ok(Self { state: PlantState::zero(&circuit), circuit, patient, disc, noise: None })
    }

    /// Adds seeded Gaussian noise (mbar, 1σ) to the measurement. Zero disables it.
    pub fn with_sensor_noise(mut self, std_dev: f64, seed: u64) -> Result<Self> {
        if !(std_dev >= 0.0 && std_dev.is_finite()) {
            return Err(Error::Config(format!("sensor noise σ = {std_dev}")));
        }
        self.noise = (std_dev > 0.0).then(|| SensorNoise {
            distribution: Normal::new(0.0, std_dev).expect("checked σ"),
            rng: ChaCha8Rng::seed_from_u64(seed),
            std_dev,
            seed,
        });
        Ok(self)
    }

    pub fn sensor_noise_std(&self) -> f64 {
        self.noise.as_ref().map_or(0.0, |n| n.std_dev)
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        Self::new(cfg.circuit.clone(), cfg.patient.clone())
    }

    pub fn circuit(&self) -> &CircuitParameters {
        &self.circuit
    }

    pub fn patient(&self) -> &PatientScenario {
        &self.patient
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn step(&mut self, p_control: f64) -> PlantOutput {
        let mut out = step_with(&mut self.state, p_control, &self.circuit, &self.patient, &self.disc);
        if let Some(n) = self.noise.as_mut() {
            out.measured_p_aw += n.distribution.sample(&mut n.rng);
        }
        out
    }

    /// Zero state; the noise generator restarts from its seed.
    pub fn reset(&mut self) {
        self.state = PlantState::zero(&self.circuit);
        if let Some(n) = self.noise.as_mut() {
            n.rng = ChaCha8Rng::seed_from_u64(n.seed);
        }
    }

    pub fn transfer_function(&self) -> DiscreteTransferFunction {
        closed_form_tf(&self.circuit, &self.patient).expect("validated parameters")
    }
}

/// Exact discrete model from `p_control` to measured `p_aw`.
pub fn closed_form_tf(
    circuit: &CircuitParameters,
    patient: &PatientScenario,
) -> Result<DiscreteTransferFunction> {
    circuit.validate()?;
    let d = Discretization::new(circuit, patient);
    let g_hose = 1.0 / circuit.r_hose;
    let g_leak = 1.0 / circuit.r_leak;
    let g_lung = 1.0 / patient.r_lung;
    let g_total = g_hose + g_leak + g_lung;
    // p_aw = (g_hose p_out + g_lung p_lung)/g_total,
    // p_lung = (1-a_l) k z⁻¹/(1 - a_l z⁻¹) p_out,  p_out = (1-a_b)/(1 - a_b z⁻¹) u
    let gain = (1.0 - d.blower_pole) / g_total;
    let numerator = vec![
        gain * g_hose,
        -gain * (d.lung_pole * g_hose - (1.0 - d.lung_pole) * d.divider * g_lung),
    ];
    let denominator = vec![
        1.0,
        -(d.blower_pole + d.lung_pole),
        d.blower_pole * d.lung_pole,
    ];
    DiscreteTransferFunction::new(
        numerator,
        denominator,
        circuit.total_delay_samples(),
        circuit.sample_time,
    )
}

/// One breath of the target pressure: IPAP during inspiration, PEEP after.
///
/// `smoothing` is an optional first-order time constant (s) applied to the
/// periodic square wave in steady state; `None` keeps sharp edges.
pub fn reference_profile(
    scenario: &PatientScenario,
    sample_time: f64,
    smoothing: Option<f64>,
) -> Result<Vec<f64>> {
    let n = (scenario.breath_duration() / sample_time).round() as i64;
    if n <= 0 {
        return Err(Error::Config(format!("breath period of {n} samples")));
    }
    let n = n as usize;
    let insp = (scenario.t_insp / sample_time).round() as usize;
    let exp = (scenario.t_exp / sample_time).round() as usize;
    if insp + exp != n {
        return Err(Error::Config(format!(
            "inspiration ({insp}) and expiration ({exp}) samples do not add up to the period ({n})"
        )));
    }
    let square: Vec<f64> = (0..n)
        .map(|k| if k < insp { scenario.ipap } else { scenario.peep })
        .collect();
    match smoothing {
        None => Ok(square),
        Some(tau) if tau <= 0.0 => Ok(square),
        Some(tau) => Ok(periodic_first_order(&square, (-sample_time / tau).exp())),
    }
}

/// Periodic steady state of `x[k+1] = a x[k] + (1-a) r[k]`.
fn periodic_first_order(r: &[f64], a: f64) -> Vec<f64> {
    let n = r.len();
    let mut x0 = 0.0;
    for &rk in r {
        x0 = a * x0 + (1.0 - a) * rk;
    }
    // x[n] = a^n x[0] + x0  ⇒  x[0] = x0 / (1 - a^n)
    let mut x = x0 / (1.0 - a.powi(n as i32));
    r.iter()
        .map(|&rk| {
            let out = x;
            x = a * x + (1.0 - a) * rk;
            out
        })
        .collect()
}
