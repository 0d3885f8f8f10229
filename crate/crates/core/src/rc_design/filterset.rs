use crate::error::{Error, Result};
use crate::lti::{DiscreteTransferFunction, FirKernel};
use std::fmt::Write as _;
use std::path::Path;

/// Everything the runtime needs: `L_c`, `l_shift`, `Q_c` with its shift, and `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RcFilterSet {
    pub l_causal: DiscreteTransferFunction,
    pub l_shift: usize,
    pub q_kernel: FirKernel,
    pub period_n: usize,
}

impl RcFilterSet {
    pub fn new(
        l_causal: DiscreteTransferFunction,
        l_shift: usize,
        q_kernel: FirKernel,
        period_n: usize,
    ) -> Result<Self> {
        let set = Self { l_causal, l_shift, q_kernel, period_n };
        set.validate()?;
        Ok(set)
    }

    pub fn sample_time(&self) -> f64 {
        self.l_causal.sample_time()
    }

    pub fn q_shift(&self) -> usize {
        self.q_kernel.forward_shift()
    }

    /// Length of the shortened memory delay line, `N − l_shift − q_shift`.
    pub fn memory_length(&self) -> usize {
        self.period_n.saturating_sub(self.l_shift + self.q_shift())
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_shift + self.q_shift() >= self.period_n {
            return Err(Error::Config(format!(
                "shift budget exceeded: l_shift {} + q_shift {} must be below N = {}",
                self.l_shift,
                self.q_shift(),
                self.period_n
            )));
        }
        if self.l_causal.pure_delay() != 0 {
            return Err(Error::Config("L_c must not carry a pure delay".into()));
        }
        Ok(())
    }

    /// Same filters, different breath period.
    pub fn with_period(&self, period_n: usize) -> Result<Self> {
        Self::new(self.l_causal.clone(), self.l_shift, self.q_kernel.clone(), period_n)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[filterset]");
        let _ = writeln!(s, "period_n = {}", self.period_n);
        let _ = writeln!(s, "sample_time = {:?}", self.sample_time());
        let _ = writeln!(s, "l_shift = {}", self.l_shift);
        let _ = writeln!(s, "q_shift = {}", self.q_shift());
        for (name, values) in [
            ("l_num", self.l_causal.numerator()),
            ("l_den", self.l_causal.denominator()),
            ("q_taps", self.q_kernel.taps()),
        ] {
            let _ = writeln!(s, "\n[{name}]");
            for v in values {
                let _ = writeln!(s, "{v:?}");
            }
        }
        s
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut section = String::new();
        let mut header: Vec<(String, String)> = Vec::new();
        let (mut l_num, mut l_den, mut q_taps) = (Vec::new(), Vec::new(), Vec::new());
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let bad = |what: &str| Error::parse(origin, format!("line {}: {what} `{line}`", lineno + 1));
            match section.as_str() {
                "filterset" => {
                    let (k, v) = line.split_once('=').ok_or_else(|| bad("expected key = value"))?;
                    header.push((k.trim().to_string(), v.trim().to_string()));
                }
                "l_num" | "l_den" | "q_taps" => {
                    let v: f64 = line.parse().map_err(|_| bad("bad coefficient"))?;
                    match section.as_str() {
                        "l_num" => l_num.push(v),
                        "l_den" => l_den.push(v),
                        _ => q_taps.push(v),
                    }
                }
                _ => return Err(bad("content outside a known section")),
            }
        }
        let get = |key: &str| -> Result<&str> {
            header
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::parse(origin, format!("missing `{key}` in [filterset]")))
        };
        let int = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| Error::parse(origin, format!("`{key}` is not a non-negative integer")))
        };
        let period_n = int("period_n")?;
        let l_shift = int("l_shift")?;
        let q_shift = int("q_shift")?;
        let ts: f64 = get("sample_time")?
            .parse()
            .map_err(|_| Error::parse(origin, "`sample_time` is not a number"))?;
        if l_num.is_empty() || l_den.is_empty() || q_taps.is_empty() {
            return Err(Error::parse(origin, "empty coefficient section"));
        }
        let l_causal = DiscreteTransferFunction::new(l_num, l_den, 0, ts)?;
        let q_kernel = match FirKernel::zero_phase(q_taps.clone()) {
            Ok(k) if k.forward_shift() == q_shift => k,
            _ => FirKernel::new(q_taps, q_shift)?,
        };
        Self::new(l_causal, l_shift, q_kernel, period_n)
    }
}

pub fn write_filterset(path: &Path, set: &RcFilterSet) -> Result<()> {
    std::fs::write(path, set.to_text()).map_err(|e| Error::io(path, e))
}

pub fn read_filterset(path: &Path) -> Result<RcFilterSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RcFilterSet::from_text(&text, path)
}
