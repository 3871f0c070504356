use proptest::prelude::*;

use rsgd::analysis::{bound_stability_convex, bound_stability_nonconvex, BoundInputs};
use rsgd::harness::mean_std;
use rsgd::optim::OptimizerSpec;
use rsgd::problems::{Activation, Problem, Sample, Sampler, Sampling};
use rsgd::schemes::SchemeSpec;
use rsgd::{ParamVector, RngStream};

fn delta_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 1..=max_len)
}

fn pv(v: Vec<f64>) -> ParamVector {
    ParamVector::from_vec(v).unwrap()
}

fn scheme_strategy() -> impl Strategy<Value = SchemeSpec> {
    prop_oneof![
        (0.001f64..=1.0).prop_map(|a| SchemeSpec::scale(a).unwrap()),
        (0.01f64..=1.0).prop_map(|f| SchemeSpec::top_k(f).unwrap()),
        Just(SchemeSpec::ScaledSign),
    ]
}

proptest! {
    #[test]
    fn scale_and_topk_split_is_exact(
        delta in delta_strategy(64),
        scheme in prop_oneof![
            (0.001f64..=1.0).prop_map(|a| SchemeSpec::scale(a).unwrap()),
            (0.01f64..=1.0).prop_map(|f| SchemeSpec::top_k(f).unwrap()),
        ],
    ) {
        let split = scheme.split(&pv(delta.clone())).unwrap();
        for ((a, r), d) in split.applied.iter().zip(split.residual.iter()).zip(&delta) {
            prop_assert_eq!((a + r).to_bits(), d.to_bits());
        }
    }

    #[test]
    fn residual_recovers_update_line_for_every_scheme(delta in delta_strategy(64), scheme in scheme_strategy()) {
        let split = scheme.split(&pv(delta.clone())).unwrap();
        for ((a, r), d) in split.applied.iter().zip(split.residual.iter()).zip(&delta) {
            prop_assert_eq!(r.to_bits(), (d - a).to_bits());
        }
    }

    #[test]
    fn scale_residual_contracts(delta in delta_strategy(64), alpha in 0.001f64..=1.0) {
        let d = pv(delta);
        let split = SchemeSpec::scale(alpha).unwrap().split(&d).unwrap();
        let expected = (1.0 - alpha) * d.norm2();
        prop_assert!((split.residual.norm2() - expected).abs() <= 1e-12 * d.norm2().max(1.0));
        for (r, x) in split.residual.iter().zip(d.iter()) {
            prop_assert!(r.abs() <= x.abs());
        }
    }

    #[test]
    fn topk_residual_is_smallest_k_sparse_error(delta in delta_strategy(12), fraction in 0.01f64..=1.0) {
        let d = delta.len();
        let k = SchemeSpec::resolved_k(fraction, d);
        let split = SchemeSpec::top_k(fraction).unwrap().split(&pv(delta.clone())).unwrap();
        prop_assert_eq!(split.applied.iter().filter(|v| **v != 0.0).count() <= k, true);
        let total: f64 = delta.iter().map(|v| v * v).sum();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << d) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let kept: f64 = (0..d).filter(|i| mask & (1 << i) != 0).map(|i| delta[i] * delta[i]).sum();
            best = best.min(total - kept);
        }
        let got = split.residual.norm2_sq();
        prop_assert!((got - best).abs() <= 1e-9 * total.max(1.0), "got {got}, best {best}");
    }

    #[test]
    fn scaled_sign_preserves_l1(delta in prop::collection::vec(
        prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3], 1..64)
    ) {
        let d = pv(delta);
        let applied = SchemeSpec::ScaledSign.split(&d).unwrap().applied;
        prop_assert!((applied.norm1() - d.norm1()).abs() <= 1e-9 * d.norm1());
        for (a, x) in applied.iter().zip(d.iter()) {
            prop_assert_eq!(a.signum(), x.signum());
        }
    }

    #[test]
    fn logistic_gradient_matches_central_difference(seed in any::<u64>(), lambda in 0.0f64..0.1) {
        let p = Problem::logistic(4, 3).unwrap().with_weight_decay(lambda).unwrap();
        let mut rng = RngStream::new(seed);
        let x = pv((0..p.dimension()).map(|_| rng.normal()).collect());
        let z = Sample::new((0..4).map(|_| rng.normal()).collect(), rng.index(3));
        let g = p.grad(&x, &z).unwrap();
        let h = 1e-5;
        let mut xs = x.as_slice().to_vec();
        for i in 0..xs.len() {
            let orig = xs[i];
            xs[i] = orig + h;
            let up = p.loss(&pv(xs.clone()), &z).unwrap();
            xs[i] = orig - h;
            let down = p.loss(&pv(xs.clone()), &z).unwrap();
            xs[i] = orig;
            let fd = (up - down) / (2.0 * h);
            prop_assert!((g.as_slice()[i] - fd).abs() <= 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn mlp_gradient_matches_central_difference(seed in any::<u64>()) {
        let p = Problem::mlp(3, &[5, 4], 2, Activation::Tanh).unwrap();
        let mut rng = RngStream::new(seed);
        let x = pv((0..p.dimension()).map(|_| 0.5 * rng.normal()).collect());
        let z = Sample::new((0..3).map(|_| rng.normal()).collect(), rng.index(2));
        let g = p.grad(&x, &z).unwrap();
        let h = 1e-5;
        let mut xs = x.as_slice().to_vec();
        for i in 0..xs.len() {
            let orig = xs[i];
            xs[i] = orig + h;
            let up = p.loss(&pv(xs.clone()), &z).unwrap();
            xs[i] = orig - h;
            let down = p.loss(&pv(xs.clone()), &z).unwrap();
            xs[i] = orig;
            let fd = (up - down) / (2.0 * h);
            prop_assert!((g.as_slice()[i] - fd).abs() <= 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn wrapped_reference_matches_base_run(
        seed in any::<u64>(),
        lr in 0.001f64..0.2,
        base in prop::sample::select(vec!["sgd", "sgdm", "adam", "adagrad"]),
        scheme in prop::sample::select(vec!["scale:0.3", "sign", "topk:0.2"]),
    ) {
        let p = Problem::logistic(5, 2).unwrap();
        let data = rsgd::problems::generate_blobs(2, 20, 5, 1.0, seed).unwrap();
        let x0 = ParamVector::zeros(p.dimension());
        let plain_spec: OptimizerSpec = format!("opt={base} lr={lr}").parse().unwrap();
        let wrapped_spec: OptimizerSpec = format!("opt=r{base} scheme={scheme} lr={lr}").parse().unwrap();
        let mut plain = plain_spec.build(x0.clone(), 1).unwrap();
        let mut wrapped = wrapped_spec.build(x0, 1).unwrap();
        let mut s1 = Sampler::new(data.len(), Sampling::WithReplacement, RngStream::with_stream(seed, 2)).unwrap();
        let mut s2 = Sampler::new(data.len(), Sampling::WithReplacement, RngStream::with_stream(seed, 2)).unwrap();
        for _ in 0..50 {
            let g1 = p.batch_grad(plain.grad_point(), &data, &s1.next_batch(2)).unwrap();
            plain.step(&g1).unwrap();
            let g2 = p.batch_grad(wrapped.grad_point(), &data, &s2.next_batch(2)).unwrap();
            wrapped.step(&g2).unwrap();
            prop_assert_eq!(plain.params(), wrapped.grad_point());
        }
    }

    #[test]
    fn stability_bounds_nondecreasing_in_alpha(
        a in 0.01f64..=1.0,
        b in 0.01f64..=1.0,
        steps in 1usize..60,
        lr in 0.001f64..0.5,
        n in 1usize..500,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let inputs = |alpha| BoundInputs { alpha, n, beta: 2.0, lipschitz: 1.5, ..BoundInputs::constant(lr, steps) };
        let divs: Vec<f64> = (0..steps).map(|t| 0.01 * t as f64).collect();
        prop_assert!(bound_stability_convex(&inputs(lo)).unwrap() <= bound_stability_convex(&inputs(hi)).unwrap());
        prop_assert!(
            bound_stability_nonconvex(&inputs(lo), &divs).unwrap()
                <= bound_stability_nonconvex(&inputs(hi), &divs).unwrap()
        );
    }

    #[test]
    fn summary_statistics_ignore_order(values in prop::collection::vec(-1e6f64..1e6, 1..30), seed in any::<u64>()) {
        let mut shuffled = values.clone();
        RngStream::new(seed).shuffle(&mut shuffled);
        let (m1, s1) = mean_std(&values);
        let (m2, s2) = mean_std(&shuffled);
        prop_assert_eq!(m1.to_bits(), m2.to_bits());
        prop_assert_eq!(s1.to_bits(), s2.to_bits());
    }
}
