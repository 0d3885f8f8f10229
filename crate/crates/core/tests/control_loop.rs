use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ventrc::control::{Controller, ControllerConfig, RcRuntime};
use ventrc::harness::{analytic_complementary_sensitivity, run_experiment, ControllerMode, ExperimentSpec};
use ventrc::lti::{DiscreteTransferFunction, FirKernel, TfFilter};
use ventrc::plant::{reference_profile, ScenarioConfig};
use ventrc::rc_design::{design_filters, DesignConfig, RcFilterSet};
use ventrc::sysid::average_frf;

const TS: f64 = 2e-3;

fn noise(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

/// `T = 0.6 z^{-3} / (1 − 0.4 z^{-1})` and its exact inverse.
fn invertible_loop(period_n: usize) -> (DiscreteTransferFunction, RcFilterSet) {
    let t = DiscreteTransferFunction::new(vec![0.6], vec![1.0, -0.4], 3, TS).unwrap();
    let l = DiscreteTransferFunction::new(vec![1.0 / 0.6, -0.4 / 0.6], vec![1.0], 0, TS).unwrap();
    (t, RcFilterSet::new(l, 3, FirKernel::identity(), period_n).unwrap())
}

#[test]
fn exact_inverse_rejects_periodic_disturbance() {
    let n = 50;
    let (t, fs) = invertible_loop(n);
    let disturbance = noise(5, n);
    // one sample of T's delay is spent on the causal ordering below
    let mut t_advanced = TfFilter::new(&t.clone().with_pure_delay(2));
    let mut rc = RcRuntime::new(&fs).unwrap();
    let mut v_prev = 0.0;
    let mut errors = Vec::new();
    for k in 0..10 * n {
        let y = t_advanced.step(v_prev);
        let e = disturbance[k % n] - y;
        v_prev = rc.step(e);
        errors.push(e);
    }
    let first: f64 = errors[..n].iter().map(|e| e * e).sum();
    assert!(first > 1.0);
    for (k, e) in errors.iter().enumerate().skip(2 * n) {
        assert!(e.abs() < 1e-9, "sample {k}: {e}");
    }
}

fn run_controller(cfg: &ControllerConfig, errors: &[f64]) -> Vec<f64> {
    let mut c = Controller::new(cfg).unwrap();
    errors.iter().map(|&e| c.step(e, 0.0)).collect()
}

#[test]
fn controller_is_linear_and_shift_invariant_by_a_period() {
    let n = 50;
    let (_, fs) = invertible_loop(n);
    let mut cfg = ControllerConfig::with_rc(fs);
    cfg.output_limits = None;
    let x1 = noise(1, 8 * n);
    let x3 = noise(3, 8 * n);
    let u1 = run_controller(&cfg, &x1);
    let u3 = run_controller(&cfg, &x3);

    let mut shifted = vec![0.0; n];
    shifted.extend_from_slice(&x1[..7 * n]);
    let u2 = run_controller(&cfg, &shifted);
    for k in 0..7 * n {
        assert!((u2[k + n] - u1[k]).abs() <= 1e-9 * (1.0 + u1[k].abs()), "shift, sample {k}");
    }
    assert!(u2[..n].iter().all(|&u| u == 0.0));

    let (a, b) = (2.5, -0.75);
    let mix: Vec<f64> = x1.iter().zip(&x3).map(|(p, q)| a * p + b * q).collect();
    let um = run_controller(&cfg, &mix);
    for k in 0..mix.len() {
        let want = a * u1[k] + b * u3[k];
        assert!((um[k] - want).abs() <= 1e-9 * (1.0 + want.abs()), "superposition, sample {k}");
    }
}

/// Filters designed on the exact loop responses of all three patients.
fn analytic_design() -> RcFilterSet {
    let frfs: Vec<_> = ScenarioConfig::canonical()
        .iter()
        .map(|s| (s.patient.name.clone(), analytic_complementary_sensitivity(s, 4000).unwrap()))
        .collect();
    let mean = average_frf(&frfs.iter().map(|(_, f)| f.clone()).collect::<Vec<_>>()).unwrap();
    let outcome = design_filters(&frfs, &mean, &DesignConfig::default()).unwrap();
    assert!(outcome.report.pass);
    outcome.filterset
}

#[test]
fn converged_command_repeats_every_breath() {
    let fs = analytic_design();
    for scenario in ScenarioConfig::canonical() {
        let n = reference_profile(&scenario.patient, TS, None).unwrap().len();
        let spec = ExperimentSpec {
            breaths: 40,
            ..ExperimentSpec::new(scenario.clone(), ControllerMode::Rc, Some(fs.with_period(n).unwrap()))
        };
        let log = run_experiment(&spec).unwrap();
        assert!(log.divergence.is_none());
        let total = log.len();
        // L_c's large high-frequency gain leaves a rounding-level jitter
        let scale = log.command.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        for k in total - n..total {
            let du = (log.command[k] - log.command[k - n]).abs();
            assert!(du < 1e-9 * scale, "{}: command drift {du} at sample {k}", scenario.patient.name);
        }
    }
}
