use super::svg::LinePlot;
use super::{BreathLog, Comparison};
use crate::error::{Error, Result};
use std::path::{Path, PathBuf};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|source| Error::Csv { path: path.to_path_buf(), source })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_path_buf(), source }
}

/// Per-sample trace: time, reference, measured airway pressure, lung pressure,
/// patient flow, command and error.
pub fn write_trace(path: &Path, log: &BreathLog) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["sample", "time_s", "reference", "p_aw", "p_lung", "q_pat", "command", "error"])
        .map_err(csv_err(path))?;
    for k in 0..log.len() {
        w.write_record(&[
            k.to_string(),
            (k as f64 * log.sample_time).to_string(),
            log.reference[k].to_string(),
            log.measured_p_aw[k].to_string(),
            log.p_lung[k].to_string(),
            log.q_pat[k].to_string(),
            log.command[k].to_string(),
            log.error(k).to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `breath,norm`, breaths numbered from 1.
pub fn write_breath_norms(path: &Path, norms: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["breath", "norm"]).map_err(csv_err(path))?;
    for (j, n) in norms.iter().enumerate() {
        w.write_record(&[(j + 1).to_string(), n.to_string()]).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_breath_norms(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    let col = headers
        .iter()
        .position(|h| h == "norm")
        .ok_or_else(|| Error::parse(path, "no `norm` column"))?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err(path))?;
            let field = rec.get(col).unwrap_or("");
            field.parse().map_err(|_| Error::parse(path, format!("bad norm `{field}`")))
        })
        .collect()
}

fn write_comparison(path: &Path, comparisons: &[Comparison]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["scenario", "breath", "baseline_norm", "candidate_norm", "ratio"])
        .map_err(csv_err(path))?;
    for c in comparisons {
        for j in 0..c.ratios.len() {
            w.write_record(&[
                c.scenario.clone(),
                (j + 1).to_string(),
                c.baseline_norms[j].to_string(),
                c.candidate_norms[j].to_string(),
                c.ratios[j].to_string(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes traces, norm tables and plots into `out_dir`; returns the files written.
pub fn emit_report(logs: &[BreathLog], comparisons: &[Comparison], out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for log in logs {
        let stem = format!("{}_{}", log.scenario, log.mode.as_str());
        let trace = out_dir.join(format!("{stem}_trace.csv"));
        write_trace(&trace, log)?;
        let norms = out_dir.join(format!("{stem}_norms.csv"));
        write_breath_norms(&norms, &log.breath_norms)?;
        written.extend([trace, norms]);
    }
    if !comparisons.is_empty() {
        let path = out_dir.join("comparison.csv");
        write_comparison(&path, comparisons)?;
        written.push(path);
    }

    let mut scenarios: Vec<&str> = logs.iter().map(|l| l.scenario.as_str()).collect();
    scenarios.dedup();
    for scenario in scenarios {
        let group: Vec<&BreathLog> = logs.iter().filter(|l| l.scenario == scenario).collect();

        let mut norms = LinePlot::new(&format!("{scenario}: error 2-norm per breath"), "breath", "norm [mbar]");
        for log in &group {
            let pts = log.breath_norms.iter().enumerate().map(|(j, &n)| ((j + 1) as f64, n)).collect();
            norms = norms.with_series(log.mode.as_str(), pts);
        }
        let path = out_dir.join(format!("{scenario}_norms.svg"));
        write_text(&path, &norms.render())?;
        written.push(path);

        // last complete breath common to all runs
        let breath = group.iter().map(|l| l.breath_norms.len()).min().unwrap_or(0);
        let mut pressure = LinePlot::new(
            &format!("{scenario}: airway pressure, breath {breath}"),
            "time in breath [s]",
            "pressure [mbar]",
        );
        if breath > 0 {
            let first = group[0];
            let n = first.period_n;
            let range = (breath - 1) * n..breath * n;
            let t = |k: usize| (k - range.start) as f64 * first.sample_time;
            pressure = pressure.with_series("reference", range.clone().map(|k| (t(k), first.reference[k])).collect());
            for log in &group {
                let pts = range.clone().map(|k| (t(k), log.measured_p_aw[k])).collect();
                pressure = pressure.with_series(&format!("p_aw {}", log.mode.as_str()), pts);
            }
        }
        let path = out_dir.join(format!("{scenario}_pressure.svg"));
        write_text(&path, &pressure.render())?;
        written.push(path);
    }
    Ok(written)
}
