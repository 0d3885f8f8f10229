use proptest::prelude::*;
use std::f64::consts::PI;
use ventrc::lti::{evaluate, filter_stream, poly, DelayLine, DiscreteTransferFunction, FirKernel};

const TS: f64 = 2e-3;

/// Stable second-order section from a pole radius/angle pair.
fn resonator(radius: f64, angle: f64, b0: f64, b1: f64, delay: usize) -> DiscreteTransferFunction {
    let den = vec![1.0, -2.0 * radius * angle.cos(), radius * radius];
    DiscreteTransferFunction::new(vec![b0, b1], den, delay, TS).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sinusoid_steady_state_matches_evaluate(
        radius in 0.3f64..0.9,
        angle in 0.1f64..2.5,
        b0 in 0.1f64..2.0,
        b1 in -1.0f64..1.0,
        delay in 0usize..15,
        bin in 1usize..250,
    ) {
        let tf = resonator(radius, angle, b0, b1, delay);
        // 500 Hz sampling, 500-sample period: bin k sits at k Hz
        let f = bin as f64;
        let w = 2.0 * PI * f * TS;
        let len = 4000;
        let input: Vec<f64> = (0..len).map(|k| (w * k as f64).cos()).collect();
        let out = filter_stream(&tf, &input, None).unwrap();
        let h = evaluate(&tf, &[f]).unwrap().values()[0];
        // transients of a pole at radius ≤ 0.9 are gone after 3000 samples
        for k in len - 500..len {
            let want = h.norm() * (w * k as f64 + h.arg()).cos();
            prop_assert!((out[k] - want).abs() <= 1e-3 * h.norm().max(1e-9), "k {k}: {} vs {want}", out[k]);
        }
    }

    #[test]
    fn delay_line_holds_last_inputs(
        capacity in 1usize..64,
        input in prop::collection::vec(-1e3f64..1e3, 64..200),
    ) {
        let mut line = DelayLine::new(capacity).unwrap();
        for &x in &input {
            line.step(x);
        }
        let tail = &input[input.len() - capacity..];
        prop_assert_eq!(line.contents(), tail.to_vec());
    }

    #[test]
    fn symmetric_kernels_have_real_response(half in prop::collection::vec(-1.0f64..1.0, 1..30), centre in -1.0f64..1.0) {
        let mut taps = half.clone();
        taps.push(centre);
        taps.extend(half.iter().rev());
        let kernel = FirKernel::zero_phase(taps).unwrap();
        for k in 1..=250 {
            let v = kernel.response_at(k as f64, TS).unwrap();
            prop_assert!(v.im.abs() <= 1e-12 * (1.0 + v.re.abs()), "{k} Hz: {v}");
        }
    }

    #[test]
    fn cascade_response_is_product(
        r1 in 0.2f64..0.95, a1 in 0.1f64..3.0,
        r2 in 0.2f64..0.95, a2 in 0.1f64..3.0,
        f in 0.5f64..249.0,
    ) {
        let g = resonator(r1, a1, 1.0, 0.3, 2);
        let h = resonator(r2, a2, 0.5, -0.2, 5);
        let both = g.series(&h).unwrap();
        let want = g.response_at(f).unwrap() * h.response_at(f).unwrap();
        prop_assert!((both.response_at(f).unwrap() - want).norm() <= 1e-9 * want.norm().max(1.0));
    }
}

#[test]
fn roots_reassemble_polynomial() {
    let p = poly::convolve(&[1.0, -0.5], &poly::convolve(&[1.0, 0.2, 0.9], &[1.0, -3.7]));
    let rebuilt = poly::from_roots(&poly::roots_in_z(&p));
    for (a, b) in p.iter().zip(&rebuilt) {
        assert!((a - b).abs() < 1e-10, "{p:?} vs {rebuilt:?}");
    }
}
