use num_complex::Complex64;
use std::sync::OnceLock;
use ventrc::harness::{
    analytic_complementary_sensitivity, identify_scenario, run_experiment, verify_filterset, ControllerMode,
    ExperimentSpec, Level, PipelineConfig,
};
use ventrc::lti::{DiscreteTransferFunction, FrequencyResponse};
use ventrc::plant::{reference_profile, ScenarioConfig};
use ventrc::rc_design::{
    check_stability, compute_modifying_sensitivity, design_filters, design_q_fir, failure_cutoff, DesignOutcome,
    RcFilterSet,
};
use ventrc::sysid::{average_frf, fit_rational};

struct Shared {
    frfs: Vec<(String, FrequencyResponse)>,
    outcome: DesignOutcome,
}

fn shared() -> &'static Shared {
    static CELL: OnceLock<Shared> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = PipelineConfig::default();
        let mut frfs = Vec::new();
        for (i, scenario) in cfg.scenarios.iter().enumerate() {
            for (j, level) in [Level::Peep, Level::Ipap].into_iter().enumerate() {
                let seed = cfg.seed + (2 * i + j) as u64;
                let frf = identify_scenario(scenario, level, &cfg.excitation, cfg.identification_noise, seed).unwrap();
                frfs.push((format!("{}_{}", scenario.patient.name, level.as_str()), frf));
            }
        }
        let mean = average_frf(&frfs.iter().map(|(_, f)| f.clone()).collect::<Vec<_>>()).unwrap();
        let outcome = design_filters(&frfs, &mean, &cfg.design).unwrap();
        Shared { frfs, outcome }
    })
}

fn period(scenario: &ScenarioConfig) -> usize {
    reference_profile(&scenario.patient, scenario.circuit.sample_time, None).unwrap().len()
}

/// The default identification is noise-free; the shared design adds sensor noise.
#[test]
fn fit_tracks_noise_free_mean_below_30_hz() {
    let cfg = PipelineConfig::default();
    let mut frfs = Vec::new();
    for (i, scenario) in cfg.scenarios.iter().enumerate() {
        for (j, level) in [Level::Peep, Level::Ipap].into_iter().enumerate() {
            frfs.push(identify_scenario(scenario, level, &cfg.excitation, 0.0, (2 * i + j) as u64).unwrap());
        }
    }
    let mean = average_frf(&frfs).unwrap();
    let fit = fit_rational(&mean.band(0.0, 40.0), 4, 12, None).unwrap();
    assert!(fit.tf.is_stable());
    let mut worst: f64 = 0.0;
    for (f, v) in mean.band(0.0, 30.0).iter() {
        let h = fit.tf.response_at(f).unwrap();
        worst = worst.max((h.norm() - v.norm()).abs() / v.norm());
    }
    assert!(worst < 0.05, "worst magnitude error {worst}");
}

/// Peak-to-trough passband ripple of a 51-tap Hamming lowpass after peak scaling.
const Q_PASSBAND_RIPPLE: f64 = 0.005;

#[test]
fn lowering_cutoff_keeps_verdict_and_maximum() {
    let s = shared();
    let fs = &s.outcome.filterset;
    let mut lowest_above = f64::INFINITY;
    let mut passed_above = false;
    for fc in (5..=245).rev() {
        let q = design_q_fir(fc as f64, 50, fs.sample_time()).unwrap();
        let report = check_stability(&q, &fs.l_causal, fs.l_shift, &s.frfs).unwrap();
        // once a cutoff passes, every lower one does too
        assert!(report.pass || !passed_above, "{fc} Hz fails although a higher cutoff passed");
        passed_above |= report.pass;
        assert!(
            report.overall_max <= lowest_above * (1.0 + Q_PASSBAND_RIPPLE),
            "{fc} Hz: {} vs {lowest_above}",
            report.overall_max
        );
        lowest_above = lowest_above.min(report.overall_max);
    }
    assert!(passed_above);
}

#[test]
fn failure_cutoff_brackets_the_boundary() {
    let s = shared();
    let fs = &s.outcome.filterset;
    let fc = failure_cutoff(&fs.l_causal, fs.l_shift, &s.frfs, 50, (23.0, 240.0), 0.05)
        .unwrap()
        .expect("identity-like Q fails on measured responses");
    let check = |c: f64| {
        let q = design_q_fir(c, 50, fs.sample_time()).unwrap();
        check_stability(&q, &fs.l_causal, fs.l_shift, &s.frfs).unwrap().pass
    };
    assert!(!check(fc));
    assert!(check(fc - 0.05));
    assert!(fc > 23.0);
}

fn with_gain(fs: &RcFilterSet, gain: f64) -> RcFilterSet {
    let l = &fs.l_causal;
    let scaled = DiscreteTransferFunction::new(
        l.numerator().iter().map(|c| c * gain).collect(),
        l.denominator().to_vec(),
        l.pure_delay(),
        l.sample_time(),
    )
    .unwrap();
    RcFilterSet::new(scaled, fs.l_shift, fs.q_kernel.clone(), fs.period_n).unwrap()
}

/// Passing reports must give bounded runs; divergent runs must have failing reports.
#[test]
fn report_verdict_predicts_simulation() {
    let s = shared();
    let mut diverged = 0;
    let mut bounded = 0;
    for scenario in ScenarioConfig::canonical() {
        let n = period(&scenario);
        let base = s.outcome.filterset.with_period(n).unwrap();
        for gain in [0.5, 1.0, 1.6, 2.5] {
            let fs = with_gain(&base, gain);
            let report = verify_filterset(&scenario, &fs).unwrap();
            let spec = ExperimentSpec {
                breaths: 100,
                verify_stability: false,
                ..ExperimentSpec::new(scenario.clone(), ControllerMode::Rc, Some(fs))
            };
            let log = run_experiment(&spec).unwrap();
            let name = &scenario.patient.name;
            if report.pass {
                assert!(log.divergence.is_none(), "{name} gain {gain}: passed the check but diverged");
                let norms = &log.breath_norms;
                assert_eq!(norms.len(), 100);
                assert!(norms[99] <= norms[49] + 1e-6, "{name} gain {gain}: norms still growing");
                bounded += 1;
            }
            if log.divergence.is_some() {
                assert!(!report.pass, "{name} gain {gain}: diverged with a passing report");
                diverged += 1;
            }
        }
    }
    // both branches must be exercised
    assert!(bounded >= 3 && diverged >= 3, "bounded {bounded}, diverged {diverged}");
}

#[test]
fn harness_refuses_filters_that_fail_the_check() {
    let s = shared();
    let scenario = ScenarioConfig::canonical().remove(0);
    let fs = with_gain(&s.outcome.filterset.with_period(period(&scenario)).unwrap(), 2.5);
    let err = run_experiment(&ExperimentSpec::new(scenario, ControllerMode::Rc, Some(fs))).unwrap_err();
    assert!(matches!(err, ventrc::Error::Unstable(_)), "{err}");
}

#[test]
fn harmonics_below_cutoff_are_suppressed() {
    let s = shared();
    for scenario in ScenarioConfig::canonical() {
        let n = period(&scenario);
        let fs = s.outcome.filterset.with_period(n).unwrap();
        let t = analytic_complementary_sensitivity(&scenario, n).unwrap();
        let sr = compute_modifying_sensitivity(&fs.q_kernel, &fs.l_causal, fs.l_shift, &t, n).unwrap();
        assert!(sr.marginal_bins.is_empty());
        // the grid is exactly the breath harmonics
        for (f, v) in sr.response.iter().filter(|(f, _)| *f <= 5.0) {
            assert!(v.norm() < 0.1, "{}: |S_R({f} Hz)| = {}", scenario.patient.name, v.norm());
        }
        let worst = sr.response.values().iter().map(|v: &Complex64| v.norm()).fold(0.0, f64::max);
        assert!(worst.is_finite());
    }
}
