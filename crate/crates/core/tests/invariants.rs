use proptest::prelude::*;

use tailvar::classify::{classify_tail, von_mises_index, ClassifyOptions};
use tailvar::evt::{ks_distance, simulate_maxima, Domain};
use tailvar::funcmodel::catalog;
use tailvar::funcmodel::expr::Expr;
use tailvar::funcmodel::{TailFunction, Transform};
use tailvar::hazard::cumulative_hazard;
use tailvar::inverses::{generalized_inverse, Side};
use tailvar::numlimit::{estimate_sequence, LimitOptions, ProbeGrid, Verdict};

/// Regularly varying survivals and their indices.
fn regular(k: usize, p: f64) -> (TailFunction, f64) {
    match k % 4 {
        0 => (catalog::pareto(p).unwrap().survival().clone(), -p),
        1 => (catalog::frechet(p).unwrap().survival().clone(), -p),
        2 => {
            let e = Expr::parse(&format!("t^-{p} * log(t)")).unwrap();
            (e.into_tail_function("t^-p log t", 2.0).unwrap(), -p)
        }
        _ => {
            let e = Expr::parse(&format!("t^{p} / (1 + 1/t)")).unwrap();
            (e.into_tail_function("t^p/(1+1/t)", 1.0).unwrap(), p)
        }
    }
}

fn index(f: &TailFunction) -> f64 {
    classify_tail(f, None, &ClassifyOptions::default())
        .index()
        .expect("determinate class")
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 20, ..ProptestConfig::default() })]

    #[test]
    fn power_law_of_indices(k in 0usize..4, p in 0.5f64..3.0, beta in 0.25f64..3.0) {
        let (f, rho) = regular(k, p);
        let fb = f.transform(Transform::Power(beta)).unwrap();
        let (i, ib) = (index(&f), index(&fb));
        prop_assert!((i - rho).abs() <= 2e-2, "index {i} vs {rho}");
        prop_assert!((ib - beta * i).abs() <= 2e-2, "{ib} vs {beta}·{i}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10, ..ProptestConfig::default() })]

    #[test]
    fn product_adds_indices(k1 in 0usize..4, p1 in 0.5f64..3.0, k2 in 0usize..4, p2 in 0.5f64..3.0) {
        let (f1, _) = regular(k1, p1);
        let (f2, _) = regular(k2, p2);
        let t0 = f1.t0().max(f2.t0());
        let prod = f1.clone().with_t0(t0).transform(Transform::Product(f2.clone().with_t0(t0))).unwrap();
        let sum = index(&f1) + index(&f2);
        let ip = index(&prod);
        prop_assert!((ip - sum).abs() <= 2e-2, "{ip} vs {sum}");
    }

    #[test]
    fn scaling_keeps_the_index(k in 0usize..4, p in 0.5f64..3.0, c in 1e-3f64..1e3) {
        let (f, _) = regular(k, p);
        let g = f.transform(Transform::Scale(c)).unwrap();
        let grid = ProbeGrid::default();
        let opts = LimitOptions::default();
        let a = von_mises_index(&f, grid, &opts).value().unwrap();
        let b = von_mises_index(&g, grid, &opts).value().unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 5, ..ProptestConfig::default() })]

    #[test]
    fn composition_multiplies_indices(k in 0usize..4, p1 in 0.5f64..2.0, p2 in 0.5f64..2.0) {
        let (f1, _) = regular(k, p1);
        let inner = Expr::parse(&format!("t^{p2} * log(t + 1)")).unwrap().into_tail_function("inner", 1.0).unwrap();
        let comp = f1.transform(Transform::Compose(inner.clone())).unwrap();
        let want = index(&f1) * index(&inner);
        let got = index(&comp);
        prop_assert!((got - want).abs() <= 2e-2, "{got} vs {want}");
    }
}

proptest! {
    #[test]
    fn aitken_recovers_geometric_limits(l in -10.0f64..10.0, c in 0.1f64..5.0, r in 0.2f64..0.9) {
        let grid = ProbeGrid::default();
        let v: Vec<f64> = (0..grid.count()).map(|k| l + c * r.powi(k as i32)).collect();
        let e = estimate_sequence(&v, grid, &LimitOptions::default());
        match e.verdict {
            Verdict::Finite(x) => prop_assert!((x - l).abs() <= 1e-9 * (1.0 + l.abs()), "{x} vs {l}"),
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn cumulative_hazard_is_additive(p in -1.5f64..1.5, a in 1.0f64..10.0, w1 in 0.1f64..50.0, w2 in 0.1f64..50.0) {
        let g = TailFunction::power_law(1.0, p, 1.0);
        let (b, c) = (a + w1, a + w1 + w2);
        let whole = cumulative_hazard(&g, a, c).unwrap();
        let split = cumulative_hazard(&g, a, b).unwrap() + cumulative_hazard(&g, b, c).unwrap();
        prop_assert!((whole - split).abs() <= 1e-10 * whole.abs().max(1.0));
    }

    #[test]
    fn right_inverse_round_trip(alpha in 0.2f64..5.0, t in 1.0f64..1e12) {
        let e = catalog::pareto(alpha).unwrap();
        let inv = generalized_inverse(e.survival(), Side::Right).unwrap();
        let back = inv.eval_log(e.survival().ln_eval(t).unwrap()).unwrap();
        prop_assert!((back - t).abs() <= 1e-12 * t, "{back} vs {t}");
    }

    #[test]
    fn left_inverse_round_trip(p in 0.2f64..4.0, t in 2.0f64..1e8) {
        let f = Expr::parse(&format!("t^{p} * log(t)")).unwrap().into_tail_function("f", 2.0).unwrap();
        let inv = generalized_inverse(&f, Side::Left).unwrap();
        let back = inv.eval_log(f.ln_eval(t).unwrap()).unwrap();
        prop_assert!((back - t).abs() <= 1e-12 * t, "{back} vs {t}");
    }

    #[test]
    fn ks_distance_is_a_probability_gap(xs in prop::collection::vec(-5.0f64..20.0, 1..200)) {
        let d = ks_distance(&xs, Domain::Gumbel).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!(d >= 0.5 / xs.len() as f64 - 1e-15);
    }

    #[test]
    fn expressions_match_direct_evaluation(a in 0.1f64..3.0, b in 0.1f64..3.0, t in 1.0f64..50.0) {
        let e = Expr::parse(&format!("exp(-{a}*t) * t^{b} + sqrt(t)/(1 + log(t))")).unwrap();
        let direct = (-a * t).exp() * t.powf(b) + t.sqrt() / (1.0 + t.ln());
        prop_assert!((e.eval(t) - direct).abs() <= 1e-13 * direct);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn maxima_depend_only_on_the_seed(seed in any::<u64>(), n in 1u64..500, blocks in 1usize..300) {
        let d = catalog::exponential(1.0).unwrap().distribution;
        let a = simulate_maxima(&d, n, blocks, seed, 1.0, 0.0).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate_maxima(&d, n, blocks, seed, 1.0, 0.0).unwrap());
        prop_assert_eq!(a, b);
    }
}
