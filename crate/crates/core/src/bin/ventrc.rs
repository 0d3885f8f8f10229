use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use ventrc::control::DEFAULT_SAMPLE_TIME;
use ventrc::harness::{
    compare_norms, emit_report, identify_scenario, read_breath_norms, run_experiment, run_pipeline, verify_filterset,
    write_breath_norms, BreathLog, Comparison, ControllerMode, ExperimentSpec, Level, PipelineConfig,
};
use ventrc::lti::{write_tf_file, FrequencyResponse};
use ventrc::plant::ScenarioConfig;
use ventrc::rc_design::{
    check_stability, design_filters, read_filterset, write_filterset, DesignConfig, FitWeighting, StabilityReport,
};
use ventrc::sysid::{average_frf, fit_rational, MultisineSpec};

/// Exit status for a failed stability check or a diverged run (clap uses 2 for usage errors).
const EXIT_REJECTED: u8 = 3;

#[derive(Parser)]
#[command(name = "ventrc", version, about = "Repetitive-control design and ventilation testbench")]
struct Cli {
    /// Log level when RUST_LOG is unset
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Excitation {
    /// every DFT bin up to Nyquist
    Full,
    /// 40 log-spaced bins, 0.5 to 100 Hz
    Log,
}

#[derive(Clone, Copy, ValueEnum)]
enum Weighting {
    Uniform,
    Relative,
}

impl From<Weighting> for FitWeighting {
    fn from(w: Weighting) -> Self {
        match w {
            Weighting::Uniform => FitWeighting::Uniform,
            Weighting::Relative => FitWeighting::Relative,
        }
    }
}

#[derive(clap::Args)]
struct FitArgs {
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value_t = 12)]
    delay: usize,
    /// Upper edge of the fitted band in Hz; 0 fits the whole grid
    #[arg(long, default_value_t = 40.0)]
    fit_band_hz: f64,
    #[arg(long, value_enum, default_value = "uniform")]
    weighting: Weighting,
}

impl FitArgs {
    fn band(&self) -> Option<f64> {
        (self.fit_band_hz > 0.0).then_some(self.fit_band_hz)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Measure the benchmark loop's complementary sensitivity with a multisine
    Identify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        level: Level,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        excitation: Excitation,
        /// Sensor noise σ in mbar
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Fit a rational model to one FRF, or to the mean of several
    Fit {
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_TIME)]
        sample_time: f64,
    },
    /// Fit, invert, design Q and check robust stability against every FRF in a directory
    Design {
        #[arg(long)]
        frf_dir: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value_t = 23.0)]
        cutoff_hz: f64,
        #[arg(long, default_value_t = 50)]
        q_order: usize,
        #[arg(long, default_value_t = 2000)]
        period_n: usize,
        #[arg(long, default_value_t = 0.05)]
        min_margin: f64,
        #[arg(long)]
        out: PathBuf,
        /// Per-frequency stability report; defaults to `<out>.report.csv`
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_TIME)]
        sample_time: f64,
    },
    /// Check an existing filter set against every FRF in a directory
    CheckStability {
        #[arg(long)]
        filterset: PathBuf,
        #[arg(long)]
        frf_dir: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Simulate breaths and write traces, norms and plots
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        mode: ControllerMode,
        #[arg(long, default_value_t = 20)]
        breaths: usize,
        #[arg(long)]
        filterset: Option<PathBuf>,
        /// Stretch or shrink the filter set's memory to this scenario's breath length
        #[arg(long)]
        retarget_period: bool,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-breath norm ratios of two runs
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Identify, design and run every scenario in a directory
    All {
        #[arg(long, default_value = "scenarios")]
        scenario_dir: PathBuf,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        breaths: usize,
        /// Sensor noise σ in mbar during identification
        #[arg(long, default_value_t = 0.005)]
        noise: f64,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log_level)).init();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_REJECTED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// `Ok(false)` means the work finished but the result was rejected.
fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Identify { scenario, level, out, excitation, noise, seed } => {
            let config = ScenarioConfig::load(&scenario)?;
            let ts = config.circuit.sample_time;
            let spec = match excitation {
                Excitation::Full => MultisineSpec::full_band(ts),
                Excitation::Log => MultisineSpec::log_spaced(ts),
            };
            let frf = identify_scenario(&config, level, &spec, noise, seed)?;
            frf.write_csv(&out)?;
            println!("{} bins written to {}", frf.len(), out.display());
            Ok(true)
        }
        Command::Fit { fit, inputs, out, sample_time } => {
            let frfs = inputs
                .iter()
                .map(|p| FrequencyResponse::read_csv(p, sample_time))
                .collect::<ventrc::Result<Vec<_>>>()?;
            let mean = average_frf(&frfs)?;
            let band = match fit.band() {
                Some(hi) => mean.band(0.0, hi),
                None => mean,
            };
            let weights: Option<Vec<f64>> = match fit.weighting {
                Weighting::Uniform => None,
                Weighting::Relative => Some(band.values().iter().map(|v| 1.0 / v.norm().max(1e-12)).collect()),
            };
            let result = fit_rational(&band, fit.order, fit.delay, weights.as_deref())?;
            write_tf_file(&out, &result.tf)?;
            let report = &result.report;
            println!(
                "{} iterations, residual {:.4e}, converged {}, poles reflected {}",
                report.iterations,
                report.final_residual(),
                report.converged,
                report.poles_reflected
            );
            Ok(true)
        }
        Command::Design {
            frf_dir,
            fit,
            cutoff_hz,
            q_order,
            period_n,
            min_margin,
            out,
            report,
            sample_time,
        } => {
            let frfs = load_frf_dir(&frf_dir, sample_time)?;
            let mean = average_frf(&frfs.iter().map(|(_, f)| f.clone()).collect::<Vec<_>>())?;
            let config = DesignConfig {
                order: fit.order,
                delay_samples: fit.delay,
                cutoff_hz,
                q_order,
                period_n,
                min_margin,
                fit_band_hz: fit.band(),
                weighting: fit.weighting.into(),
            };
            let outcome = design_filters(&frfs, &mean, &config)?;
            write_filterset(&out, &outcome.filterset)?;
            let report_path = report.unwrap_or_else(|| out.with_extension("report.csv"));
            outcome.report.write_csv(&report_path)?;
            println!("l_shift {}, q_shift {}", outcome.filterset.l_shift, outcome.filterset.q_shift());
            Ok(judge(&outcome.report, min_margin))
        }
        Command::CheckStability { filterset, frf_dir, report } => {
            let fs = read_filterset(&filterset)?;
            let frfs = load_frf_dir(&frf_dir, fs.sample_time())?;
            let result = check_stability(&fs.q_kernel, &fs.l_causal, fs.l_shift, &frfs)?;
            result.write_csv(&report)?;
            Ok(judge(&result, 0.0))
        }
        Command::Run { scenario, mode, breaths, filterset, retarget_period, out_dir, noise, seed } => {
            let config = ScenarioConfig::load(&scenario)?;
            let mut spec = ExperimentSpec { breaths, seed, sensor_noise: noise, ..ExperimentSpec::new(config, mode, None) };
            if let Some(path) = filterset {
                let fs = read_filterset(&path)?;
                spec.filterset = Some(if retarget_period { fs.with_period(spec.period_samples()?)? } else { fs });
            }
            if mode == ControllerMode::Rc {
                let fs = spec.filterset.as_ref().context("--mode rc needs --filterset")?;
                if fs.period_n == spec.period_samples()? {
                    let report = verify_filterset(&spec.scenario, fs)?;
                    if !report.pass {
                        print!("{}", report.summary());
                        log::error!("filter set rejected for {}", spec.scenario.patient.name);
                        return Ok(false);
                    }
                }
            }
            let log = run_experiment(&spec)?;
            emit_report(std::slice::from_ref(&log), &[], &out_dir)?;
            print_norms(&log);
            Ok(log.divergence.is_none())
        }
        Command::Compare { baseline, candidate, out } => {
            let base = read_breath_norms(&baseline)?;
            let cand = read_breath_norms(&candidate)?;
            let cmp = compare_norms(&stem(&baseline), &base, &cand)?;
            print_comparison(&cmp);
            if let Some(path) = out {
                write_breath_norms(&path, &cmp.ratios)?;
            }
            Ok(true)
        }
        Command::All { scenario_dir, out_dir, breaths, noise, seed } => run_all(&scenario_dir, &out_dir, breaths, noise, seed),
    }
}

fn run_all(scenario_dir: &Path, out_dir: &Path, breaths: usize, noise: f64, seed: u64) -> Result<bool> {
    let mut scenarios = Vec::new();
    for path in sorted_files(scenario_dir, "cfg")? {
        scenarios.push(ScenarioConfig::load(&path)?);
    }
    if scenarios.is_empty() {
        bail!("no .cfg files in {}", scenario_dir.display());
    }
    let config = PipelineConfig { scenarios, identification_noise: noise, breaths, seed, ..PipelineConfig::default() };
    let result = run_pipeline(&config)?;

    let frf_dir = out_dir.join("frf");
    std::fs::create_dir_all(&frf_dir).with_context(|| format!("creating {}", frf_dir.display()))?;
    for (label, frf) in &result.frfs {
        frf.write_csv(&frf_dir.join(format!("{label}.csv")))?;
    }
    result.mean_frf.write_csv(&out_dir.join("mean_frf.csv"))?;
    write_tf_file(&out_dir.join("tfit.coeff"), result.design.t_fit())?;
    write_filterset(&out_dir.join("rc.filterset"), &result.design.filterset)?;
    result.design.report.write_csv(&out_dir.join("stability_report.csv"))?;
    result.unfiltered_report.write_csv(&out_dir.join("stability_report_q1.csv"))?;
    println!("without Q: max |1-TL| = {:.4}", result.unfiltered_report.overall_max);

    if !judge(&result.design.report, config.design.min_margin) {
        return Ok(false);
    }
    let logs: Vec<BreathLog> = result.runs.iter().flat_map(|r| [r.pid.clone(), r.rc.clone()]).collect();
    let comparisons: Vec<Comparison> = result.runs.iter().map(|r| r.comparison.clone()).collect();
    emit_report(&logs, &comparisons, out_dir)?;
    for c in &comparisons {
        print_comparison(c);
    }
    Ok(logs.iter().all(|l| l.divergence.is_none()))
}

fn judge(report: &StabilityReport, min_margin: f64) -> bool {
    print!("{}", report.summary());
    let ok = report.pass && report.margin() >= min_margin;
    if !ok {
        log::error!("stability check failed (margin {:.4}, required {min_margin})", report.margin());
    }
    ok
}

fn print_norms(log: &BreathLog) {
    for (j, n) in log.breath_norms.iter().enumerate() {
        println!("{} {} breath {:>3}: {n:.6}", log.scenario, log.mode.as_str(), j + 1);
    }
    if let Some(d) = &log.divergence {
        println!("diverged at sample {}: {}", d.sample, d.message);
    }
}

fn print_comparison(c: &Comparison) {
    for (j, r) in c.ratios.iter().enumerate() {
        println!("{} breath {:>3}: ratio {r:.4}", c.scenario, j + 1);
    }
    println!("{}: converged ratio {:.4}", c.scenario, c.converged_ratio);
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn sorted_files(dir: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == extension))
        .collect();
    files.sort();
    Ok(files)
}

/// Every `*.csv` in `dir`, labelled by file stem.
fn load_frf_dir(dir: &Path, sample_time: f64) -> Result<Vec<(String, FrequencyResponse)>> {
    let files = sorted_files(dir, "csv")?;
    if files.is_empty() {
        bail!("no FRF files in {}", dir.display());
    }
    files
        .iter()
        .map(|p| Ok((stem(p), FrequencyResponse::read_csv(p, sample_time)?)))
        .collect()
}
