use crate::error::{Error, Result};
use crate::lti::{rad_per_sample, DiscreteTransferFunction, FirKernel, FrequencyResponse};
use num_complex::Complex64;
use std::path::Path;

/// Fewer grid points than this draw a warning: the condition quantifies over all ω.
const MIN_GRID_POINTS: usize = 400;
const MARGINAL_DENOMINATOR: f64 = 1e-12;

/// `L(e^{iω}) = e^{iω·l_shift}·L_c(e^{iω})`.
pub fn learning_response(
    l_causal: &DiscreteTransferFunction,
    l_shift: usize,
    frequency_hz: f64,
) -> Result<Complex64> {
    let w = rad_per_sample(frequency_hz, l_causal.sample_time());
    Ok(l_causal.response_at(frequency_hz)? * Complex64::from_polar(1.0, w * l_shift as f64))
}

/// `|Q(1 − Tᵢ·L)|` per frequency and per plant.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub frequencies_hz: Vec<f64>,
    pub labels: Vec<String>,
    /// `magnitudes[i][k]`: plant `i` at frequency `k`
    pub magnitudes: Vec<Vec<f64>>,
    pub per_plant_max: Vec<f64>,
    pub overall_max: f64,
    pub pass: bool,
}

impl StabilityReport {
    pub fn margin(&self) -> f64 {
        1.0 - self.overall_max
    }

    /// Frequency where plant `index` attains its maximum.
    pub fn argmax_hz(&self, index: usize) -> f64 {
        let row = &self.magnitudes[index];
        let k = (0..row.len())
            .max_by(|&a, &b| row[a].total_cmp(&row[b]))
            .unwrap_or(0);
        self.frequencies_hz.get(k).copied().unwrap_or(f64::NAN)
    }

    /// Columns: `frequency_hz`, then one per plant label.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header = vec!["frequency_hz".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (k, f) in self.frequencies_hz.iter().enumerate() {
            let mut row = vec![f.to_string()];
            row.extend(self.magnitudes.iter().map(|m| m[k].to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (i, label) in self.labels.iter().enumerate() {
            s.push_str(&format!(
                "{label}: max |Q(1-TL)| = {:.4} at {:.3} Hz\n",
                self.per_plant_max[i],
                self.argmax_hz(i)
            ));
        }
        s.push_str(&format!(
            "overall max = {:.4}, margin = {:.4}: {}\n",
            self.overall_max,
            self.margin(),
            if self.pass { "PASS" } else { "FAIL" }
        ));
        s
    }
}

/// Evaluates the robust-stability condition `|Q(1 − Tᵢ L)| < 1` on the FRF grid.
pub fn check_stability(
    q: &FirKernel,
    l_causal: &DiscreteTransferFunction,
    l_shift: usize,
    frfs: &[(String, FrequencyResponse)],
) -> Result<StabilityReport> {
    let (_, first) = frfs
        .first()
        .ok_or_else(|| Error::Config("no FRFs to check".into()))?;
    if let Some((label, _)) = frfs.iter().find(|(_, r)| !r.same_grid(first)) {
        return Err(Error::Config(format!("FRF `{label}` is on a different grid")));
    }
    let ts = first.sample_time();
    if (l_causal.sample_time() - ts).abs() > 1e-12 * ts {
        return Err(Error::Config("filter and FRF sample times differ".into()));
    }
    if !first.reaches_nyquist() {
        log::warn!("stability grid stops at {:.3} Hz, below Nyquist", first.frequencies_hz().last().unwrap_or(&0.0));
    }
    if first.len() < MIN_GRID_POINTS {
        log::warn!("stability grid has only {} points", first.len());
    }

    let factors = first
        .frequencies_hz()
        .iter()
        .map(|&f| Ok((q.response_at(f, ts)?, learning_response(l_causal, l_shift, f)?)))
        .collect::<Result<Vec<_>>>()?;
    let magnitudes: Vec<Vec<f64>> = frfs
        .iter()
        .map(|(_, r)| {
            r.values()
                .iter()
                .zip(&factors)
                .map(|(&t, &(qv, lv))| (qv * (1.0 - t * lv)).norm())
                .collect()
        })
        .collect();
    let per_plant_max: Vec<f64> =
        magnitudes.iter().map(|m| m.iter().copied().fold(0.0, f64::max)).collect();
    let overall_max = per_plant_max.iter().copied().fold(0.0, f64::max);
    Ok(StabilityReport {
        frequencies_hz: first.frequencies_hz().to_vec(),
        labels: frfs.iter().map(|(l, _)| l.clone()).collect(),
        magnitudes,
        per_plant_max,
        overall_max,
        pass: overall_max < 1.0,
    })
}

/// Modifying sensitivity and the bins where its denominator nearly vanishes.
#[derive(Debug, Clone)]
pub struct ModifyingSensitivity {
    pub response: FrequencyResponse,
    pub marginal_bins: Vec<usize>,
}

/// `S_R = (1 − z^{-N}Q) / (1 − (1 − T·L)·z^{-N}Q)` on the grid of `t`.
pub fn compute_modifying_sensitivity(
    q: &FirKernel,
    l_causal: &DiscreteTransferFunction,
    l_shift: usize,
    t: &FrequencyResponse,
    period_n: usize,
) -> Result<ModifyingSensitivity> {
    let ts = t.sample_time();
    let mut marginal_bins = Vec::new();
    let values = t
        .iter()
        .enumerate()
        .map(|(k, (f, tv))| {
            let memory = Complex64::from_polar(1.0, -rad_per_sample(f, ts) * period_n as f64)
                * q.response_at(f, ts)?;
            let den = 1.0 - (1.0 - tv * learning_response(l_causal, l_shift, f)?) * memory;
            if den.norm() < MARGINAL_DENOMINATOR {
                marginal_bins.push(k);
            }
            Ok((1.0 - memory) / den)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModifyingSensitivity {
        response: FrequencyResponse::new(t.frequencies_hz().to_vec(), values, ts)?,
        marginal_bins,
    })
}
