use super::{check_stability, design_q_fir, zpetc_invert, RcFilterSet, StabilityReport};
use crate::error::{Error, Result};
use crate::lti::{DiscreteTransferFunction, FrequencyResponse};
use crate::sysid::{fit_rational, RationalFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitWeighting {
    Uniform,
    /// `1/|H|`, i.e. relative error
    Relative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignConfig {
    pub order: usize,
    pub delay_samples: usize,
    pub cutoff_hz: f64,
    pub q_order: usize,
    pub period_n: usize,
    /// required `1 − max |Q(1−TL)|`
    pub min_margin: f64,
    /// upper edge of the band used by the fit; `None` fits the whole grid
    pub fit_band_hz: Option<f64>,
    pub weighting: FitWeighting,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            order: 4,
            delay_samples: 12,
            cutoff_hz: 23.0,
            q_order: 50,
            period_n: 2000,
            min_margin: 0.05,
            fit_band_hz: Some(40.0),
            weighting: FitWeighting::Uniform,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub fit: RationalFit,
    pub filterset: RcFilterSet,
    pub report: StabilityReport,
}

impl DesignOutcome {
    pub fn t_fit(&self) -> &DiscreteTransferFunction {
        &self.fit.tf
    }

    pub fn meets(&self, min_margin: f64) -> bool {
        self.report.pass && self.report.margin() >= min_margin
    }
}

/// Fit → ZPETC → Q → stability report, without judging the report.
pub fn design_filters(
    frfs: &[(String, FrequencyResponse)],
    mean_frf: &FrequencyResponse,
    config: &DesignConfig,
) -> Result<DesignOutcome> {
    let band = match config.fit_band_hz {
        Some(hi) => mean_frf.band(0.0, hi),
        None => mean_frf.clone(),
    };
    let weights: Option<Vec<f64>> = match config.weighting {
        FitWeighting::Uniform => None,
        FitWeighting::Relative => Some(band.values().iter().map(|v| 1.0 / v.norm().max(1e-12)).collect()),
    };
    let fit = fit_rational(&band, config.order, config.delay_samples, weights.as_deref())?;
    let (l_causal, l_shift) = zpetc_invert(&fit.tf)?;
    let q = design_q_fir(config.cutoff_hz, config.q_order, mean_frf.sample_time())?;
    if l_shift + q.forward_shift() >= config.period_n {
        return Err(Error::Config(format!(
            "shift budget exceeded: l_shift {l_shift} + q_shift {} ≥ N = {}",
            q.forward_shift(),
            config.period_n
        )));
    }
    let report = check_stability(&q, &l_causal, l_shift, frfs)?;
    let filterset = RcFilterSet::new(l_causal, l_shift, q, config.period_n)?;
    Ok(DesignOutcome { fit, filterset, report })
}

/// [`design_filters`] followed by the margin gate.
pub fn design_pipeline(
    frfs: &[(String, FrequencyResponse)],
    mean_frf: &FrequencyResponse,
    config: &DesignConfig,
) -> Result<DesignOutcome> {
    let outcome = design_filters(frfs, mean_frf, config)?;
    if !outcome.meets(config.min_margin) {
        return Err(Error::Unstable(format!(
            "required margin {} not met\n{}",
            config.min_margin,
            outcome.report.summary()
        )));
    }
    Ok(outcome)
}

/// Smallest Q cutoff in `[lo_hz, hi_hz]` at which the check fails, to within
/// `tolerance_hz`. `None` if even `hi_hz` passes.
pub fn failure_cutoff(
    l_causal: &DiscreteTransferFunction,
    l_shift: usize,
    frfs: &[(String, FrequencyResponse)],
    q_order: usize,
    (lo_hz, hi_hz): (f64, f64),
    tolerance_hz: f64,
) -> Result<Option<f64>> {
    let ts = l_causal.sample_time();
    let fails = |fc: f64| -> Result<bool> {
        let q = design_q_fir(fc, q_order, ts)?;
        Ok(!check_stability(&q, l_causal, l_shift, frfs)?.pass)
    };
    if fails(lo_hz)? {
        return Err(Error::Domain(format!("check already fails at {lo_hz} Hz")));
    }
    if !fails(hi_hz)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (lo_hz, hi_hz);
    while hi - lo > tolerance_hz {
        let mid = 0.5 * (lo + hi);
        if fails(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}
