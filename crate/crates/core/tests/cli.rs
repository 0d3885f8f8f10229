use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use ventrc::lti::{read_tf_file, DiscreteTransferFunction};
use ventrc::rc_design::{read_filterset, write_filterset, RcFilterSet};

const REJECTED: i32 = 3;

fn ventrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ventrc"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.cfg"))
        .display()
        .to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Two noisy full-band adult responses in `dir/frf`.
fn identify_adult(dir: &Path) -> PathBuf {
    let frf_dir = dir.join("frf");
    std::fs::create_dir_all(&frf_dir).unwrap();
    for (level, seed) in [("peep", "1"), ("ipap", "2")] {
        let out = frf_dir.join(format!("adult_{level}.csv"));
        let o = ventrc(&[
            "identify", "--scenario", &scenario("adult"), "--level", level, "--out", s(&out),
            "--noise", "0.005", "--seed", seed,
        ]);
        assert!(o.status.success(), "{o:?}");
    }
    frf_dir
}

#[test]
fn identify_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let frf = dir.path().join("frf.csv");
    let o = ventrc(&["identify", "--scenario", &scenario("baby"), "--level", "peep", "--out", s(&frf), "--excitation", "log"]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(std::fs::read_to_string(&frf).unwrap().lines().count(), 41);

    let coeff = dir.path().join("tfit.coeff");
    let o = ventrc(&["fit", "--order", "4", "--delay", "12", "--in", s(&frf), "--out", s(&coeff), "--fit-band-hz", "0"]);
    assert!(o.status.success(), "{o:?}");
    let tf = read_tf_file(&coeff).unwrap();
    assert_eq!(tf.pure_delay(), 12);
    assert!(tf.is_stable());
}

#[test]
fn design_and_check_report_verdicts_through_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let frf_dir = identify_adult(dir.path());

    let good = dir.path().join("rc.filterset");
    let o = ventrc(&["design", "--frf-dir", s(&frf_dir), "--out", s(&good)]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("PASS"));
    assert!(dir.path().join("rc.report.csv").exists());
    assert_eq!(read_filterset(&good).unwrap().period_n, 2000);

    let bad = dir.path().join("wide.filterset");
    let o = ventrc(&["design", "--frf-dir", s(&frf_dir), "--cutoff-hz", "240", "--out", s(&bad)]);
    assert_eq!(o.status.code(), Some(REJECTED), "{o:?}");

    let report = dir.path().join("check.csv");
    let o = ventrc(&["check-stability", "--filterset", s(&good), "--frf-dir", s(&frf_dir), "--report", s(&report)]);
    assert!(o.status.success());
    let header = std::fs::read_to_string(&report).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "frequency_hz,adult_ipap,adult_peep");
    let o = ventrc(&["check-stability", "--filterset", s(&bad), "--frf-dir", s(&frf_dir), "--report", s(&report)]);
    assert_eq!(o.status.code(), Some(REJECTED));
}

fn amplified(fs: &RcFilterSet, gain: f64) -> RcFilterSet {
    let l = &fs.l_causal;
    let scaled = DiscreteTransferFunction::new(
        l.numerator().iter().map(|c| c * gain).collect(),
        l.denominator().to_vec(),
        0,
        l.sample_time(),
    )
    .unwrap();
    RcFilterSet::new(scaled, fs.l_shift, fs.q_kernel.clone(), fs.period_n).unwrap()
}

#[test]
fn run_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let frf_dir = identify_adult(dir.path());
    let fs_path = dir.path().join("rc.filterset");
    assert!(ventrc(&["design", "--frf-dir", s(&frf_dir), "--out", s(&fs_path)]).status.success());

    let out = dir.path().join("runs");
    let o = ventrc(&["run", "--scenario", &scenario("adult"), "--mode", "pid", "--breaths", "6", "--out-dir", s(&out)]);
    assert!(o.status.success(), "{o:?}");
    let o = ventrc(&[
        "run", "--scenario", &scenario("adult"), "--mode", "rc", "--breaths", "6", "--filterset", s(&fs_path),
        "--out-dir", s(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    for f in ["adult_pid_trace.csv", "adult_rc_norms.csv", "adult_norms.svg", "adult_pressure.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let ratios = dir.path().join("ratios.csv");
    let o = ventrc(&[
        "compare", "--baseline", s(&out.join("adult_pid_norms.csv")), "--candidate",
        s(&out.join("adult_rc_norms.csv")), "--out", s(&ratios),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("converged ratio"));
    assert_eq!(std::fs::read_to_string(&ratios).unwrap().lines().count(), 7);

    // pediatric breaths are 1500 samples
    let o = ventrc(&[
        "run", "--scenario", &scenario("pediatric"), "--mode", "rc", "--breaths", "2", "--filterset", s(&fs_path),
        "--out-dir", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("1500"));

    let unstable = dir.path().join("unstable.filterset");
    write_filterset(&unstable, &amplified(&read_filterset(&fs_path).unwrap(), 2.5)).unwrap();
    let o = ventrc(&[
        "run", "--scenario", &scenario("adult"), "--mode", "rc", "--breaths", "2", "--filterset", s(&unstable),
        "--out-dir", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(REJECTED), "{o:?}");
}

#[test]
fn usage_errors() {
    let o = ventrc(&["run", "--scenario", &scenario("adult"), "--mode", "rc", "--out-dir", "/nonexistent/x"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--filterset"));

    let o = ventrc(&["identify", "--scenario", "missing.cfg", "--level", "peep", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.cfg"));

    let o = ventrc(&["identify", "--scenario", &scenario("adult"), "--level", "plateau", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
}
