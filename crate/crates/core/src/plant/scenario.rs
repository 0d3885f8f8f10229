use crate::error::{Error, Result};
use ini::Ini;
use std::path::Path;

/// Lung mechanics plus ventilator settings for one patient.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientScenario {
    pub name: String,
    /// mbar·s/L
    pub r_lung: f64,
    /// L/mbar
    pub c_lung: f64,
    /// breaths/min
    pub respiratory_rate: f64,
    /// mbar
    pub peep: f64,
    /// mbar
    pub ipap: f64,
    /// s
    pub t_insp: f64,
    /// s
    pub t_exp: f64,
}

impl PatientScenario {
    pub fn adult() -> Self {
        Self {
            name: "adult".into(),
            r_lung: 5.0,
            c_lung: 0.050,
            respiratory_rate: 15.0,
            peep: 5.0,
            ipap: 15.0,
            t_insp: 1.5,
            t_exp: 2.5,
        }
    }

    pub fn pediatric() -> Self {
        Self {
            name: "pediatric".into(),
            r_lung: 50.0,
            c_lung: 0.010,
            respiratory_rate: 20.0,
            peep: 5.0,
            ipap: 35.0,
            t_insp: 1.0,
            t_exp: 2.0,
        }
    }

    pub fn baby() -> Self {
        Self {
            name: "baby".into(),
            r_lung: 50.0,
            c_lung: 0.003,
            respiratory_rate: 30.0,
            peep: 10.0,
            ipap: 25.0,
            t_insp: 0.6,
            t_exp: 1.4,
        }
    }

    /// The three canonical scenarios: adult, pediatric, baby.
    pub fn canonical() -> Vec<Self> {
        vec![Self::adult(), Self::pediatric(), Self::baby()]
    }

    pub fn breath_duration(&self) -> f64 {
        self.t_insp + self.t_exp
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_lung > 0.0 && self.c_lung > 0.0) {
            return Err(Error::Config(format!(
                "{}: lung resistance and compliance must be positive",
                self.name
            )));
        }
        if !(self.respiratory_rate > 0.0 && self.t_insp > 0.0 && self.t_exp >= 0.0) {
            return Err(Error::Config(format!("{}: invalid breath timing", self.name)));
        }
        if (self.breath_duration() - 60.0 / self.respiratory_rate).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "{}: t_insp + t_exp = {} s but respiratory rate implies {} s",
                self.name,
                self.breath_duration(),
                60.0 / self.respiratory_rate
            )));
        }
        // equal levels are allowed: a constant profile
        if !(self.ipap >= self.peep && self.peep >= 0.0) {
            return Err(Error::Config(format!("{}: need ipap ≥ peep ≥ 0", self.name)));
        }
        Ok(())
    }
}

/// Hose, leak and blower properties shared by all patients.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitParameters {
    /// mbar·s/L
    pub r_hose: f64,
    /// mbar·s/L; `f64::INFINITY` removes the leak
    pub r_leak: f64,
    /// s; zero removes the blower lag
    pub blower_time_constant: f64,
    pub blower_delay_samples: usize,
    pub measurement_delay_samples: usize,
    /// s
    pub sample_time: f64,
}

impl Default for CircuitParameters {
    fn default() -> Self {
        Self {
            r_hose: 5.0,
            r_leak: 50.0,
            blower_time_constant: 0.010,
            blower_delay_samples: 6,
            measurement_delay_samples: 6,
            sample_time: 2e-3,
        }
    }
}

impl CircuitParameters {
    pub fn total_delay_samples(&self) -> usize {
        self.blower_delay_samples + self.measurement_delay_samples
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_hose > 0.0 && self.r_leak > 0.0) {
            return Err(Error::Config("hose and leak resistances must be positive".into()));
        }
        if !(self.blower_time_constant >= 0.0) {
            return Err(Error::Config("blower time constant must be non-negative".into()));
        }
        if !(self.sample_time > 0.0 && self.sample_time.is_finite()) {
            return Err(Error::Config("sample time must be positive".into()));
        }
        Ok(())
    }
}

/// Contents of a scenario configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub patient: PatientScenario,
    pub circuit: CircuitParameters,
}

impl ScenarioConfig {
    pub fn canonical() -> Vec<Self> {
        PatientScenario::canonical()
            .into_iter()
            .map(|patient| Self { patient, circuit: CircuitParameters::default() })
            .collect()
    }

    /// Reads an INI-style file with `[patient]`, `[ventilator]` and `[circuit]`
    /// sections. Missing circuit keys fall back to the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let conf = Ini::load_from_file(path).map_err(|e| match e {
            ini::Error::Io(source) => Error::io(path, source),
            ini::Error::Parse(p) => Error::parse(path, p.to_string()),
        })?;
        let get = |section: &str, key: &str| -> Option<&str> {
            conf.section(Some(section)).and_then(|s| s.get(key)).map(str::trim)
        };
        let num = |section: &str, key: &str| -> Result<f64> {
            let raw = get(section, key)
                .ok_or_else(|| Error::parse(path, format!("missing [{section}] {key}")))?;
            parse_number(raw).ok_or_else(|| Error::parse(path, format!("[{section}] {key}: bad number `{raw}`")))
        };
        let opt_num = |section: &str, key: &str, default: f64| -> Result<f64> {
            match get(section, key) {
                Some(_) => num(section, key),
                None => Ok(default),
            }
        };
        let opt_int = |section: &str, key: &str, default: usize| -> Result<usize> {
            match get(section, key) {
                Some(raw) => raw
                    .parse()
                    .map_err(|_| Error::parse(path, format!("[{section}] {key}: bad integer `{raw}`"))),
                None => Ok(default),
            }
        };
        let name = get("patient", "name")
            .map(str::to_owned)
            .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
            .unwrap_or_default();
        let patient = PatientScenario {
            name,
            r_lung: num("patient", "r_lung")?,
            c_lung: num("patient", "c_lung")?,
            respiratory_rate: num("ventilator", "respiratory_rate")?,
            peep: num("ventilator", "peep")?,
            ipap: num("ventilator", "ipap")?,
            t_insp: num("ventilator", "t_insp")?,
            t_exp: num("ventilator", "t_exp")?,
        };
        let d = CircuitParameters::default();
        let circuit = CircuitParameters {
            r_hose: opt_num("circuit", "r_hose", d.r_hose)?,
            r_leak: opt_num("circuit", "r_leak", d.r_leak)?,
            blower_time_constant: opt_num("circuit", "blower_time_constant", d.blower_time_constant)?,
            blower_delay_samples: opt_int("circuit", "blower_delay_samples", d.blower_delay_samples)?,
            measurement_delay_samples: opt_int(
                "circuit",
                "measurement_delay_samples",
                d.measurement_delay_samples,
            )?,
            sample_time: opt_num("circuit", "sample_time", d.sample_time)?,
        };
        patient.validate()?;
        circuit.validate()?;
        Ok(Self { patient, circuit })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let p = &self.patient;
        let c = &self.circuit;
        let mut conf = Ini::new();
        conf.with_section(Some("patient"))
            .set("name", p.name.as_str())
            .set("r_lung", p.r_lung.to_string())
            .set("c_lung", p.c_lung.to_string());
        conf.with_section(Some("ventilator"))
            .set("respiratory_rate", p.respiratory_rate.to_string())
            .set("peep", p.peep.to_string())
            .set("ipap", p.ipap.to_string())
            .set("t_insp", p.t_insp.to_string())
            .set("t_exp", p.t_exp.to_string());
        conf.with_section(Some("circuit"))
            .set("r_hose", c.r_hose.to_string())
            .set("r_leak", c.r_leak.to_string())
            .set("blower_time_constant", c.blower_time_constant.to_string())
            .set("blower_delay_samples", c.blower_delay_samples.to_string())
            .set("measurement_delay_samples", c.measurement_delay_samples.to_string())
            .set("sample_time", c.sample_time.to_string());
        conf.write_to_file(path).map_err(|e| Error::io(path, e))
    }
}

fn parse_number(raw: &str) -> Option<f64> {
    match raw.to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Some(f64::INFINITY),
        other => other.parse().ok(),
    }
}
