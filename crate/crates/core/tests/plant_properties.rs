use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ventrc::plant::{Plant, ScenarioConfig};

fn random_input(seed: u64, len: usize, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| scale * (rng.random::<f64>() * 2.0 - 1.0)).collect()
}

fn simulate(scenario: &ScenarioConfig, input: &[f64]) -> Vec<[f64; 4]> {
    let mut plant = Plant::from_config(scenario).unwrap();
    input
        .iter()
        .map(|&u| {
            let o = plant.step(u);
            [o.measured_p_aw, o.p_aw, o.p_lung, o.q_pat()]
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn superposition_holds(a in -3.0f64..3.0, b in -3.0f64..3.0, s1 in 0u64..1000, s2 in 0u64..1000, which in 0usize..3) {
        let scenario = &ScenarioConfig::canonical()[which];
        let u1 = random_input(s1, 1500, 30.0);
        let u2 = random_input(s2 + 1000, 1500, 30.0);
        let mix: Vec<f64> = u1.iter().zip(&u2).map(|(x, y)| a * x + b * y).collect();
        let (y1, y2, ym) = (simulate(scenario, &u1), simulate(scenario, &u2), simulate(scenario, &mix));
        for k in 0..mix.len() {
            for c in 0..4 {
                let want = a * y1[k][c] + b * y2[k][c];
                prop_assert!((ym[k][c] - want).abs() <= 1e-10 * (1.0 + want.abs()), "k {k} channel {c}");
            }
        }
    }
}

#[test]
fn bounded_input_keeps_states_bounded() {
    for scenario in ScenarioConfig::canonical() {
        let input = random_input(3, 30_000, 80.0);
        let mut plant = Plant::from_config(&scenario).unwrap();
        for &u in &input {
            let o = plant.step(u);
            assert!(o.p_aw.abs() <= 80.0 && o.p_lung.abs() <= 80.0, "{}: {o:?}", scenario.patient.name);
            assert!(o.node.flow_residual().abs() <= 1e-12);
        }
    }
}

#[test]
fn reset_restarts_from_rest() {
    let scenario = &ScenarioConfig::canonical()[0];
    let input = random_input(9, 700, 20.0);
    let mut plant = Plant::from_config(scenario).unwrap();
    let first: Vec<f64> = input.iter().map(|&u| plant.step(u).measured_p_aw).collect();
    plant.reset();
    let second: Vec<f64> = input.iter().map(|&u| plant.step(u).measured_p_aw).collect();
    assert_eq!(first, second);
}
