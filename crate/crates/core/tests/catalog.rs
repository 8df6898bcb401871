use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tailvar::classify::{classify_tail, ClassifyOptions, TailVariant};
use tailvar::funcmodel::catalog::{self, catalog};
use tailvar::numlimit::{estimate_limit, LimitOptions};

fn same_class(a: &TailVariant, b: &TailVariant) -> bool {
    match (a, b) {
        (TailVariant::Slow, TailVariant::Slow) | (TailVariant::Undetermined, TailVariant::Undetermined) => true,
        (TailVariant::Regular { rho: x }, TailVariant::Regular { rho: y }) => (x - y).abs() <= 1e-2,
        (TailVariant::Gamma { alpha: x, .. }, TailVariant::Gamma { alpha: y, .. }) => x == y,
        (TailVariant::RapidDeHaan(x), TailVariant::RapidDeHaan(y)) => x == y,
        _ => false,
    }
}

#[test]
fn survivals_classify_to_their_truth() {
    for e in catalog() {
        let opts = ClassifyOptions::with_grid(e.grid());
        let c = classify_tail(e.survival(), None, &opts);
        assert!(same_class(&c.variant, &e.truth.variant), "{}: {} vs {}", e.name, c.summary(), e.truth.summary());
        if let (Some(g_hat), Some(g)) = (c.aux(), &e.truth_aux) {
            // The fitted auxiliary is asymptotically equivalent to the known one.
            let lim = estimate_limit(
                |t| match (g_hat.ln_eval(t), g.ln_eval(t)) {
                    (Ok(a), Ok(b)) => (a - b).exp(),
                    _ => f64::NAN,
                },
                opts.grid,
                &LimitOptions::with_tol(1e-2),
            );
            assert!(lim.is_finite_near(1.0, 1e-2), "{}: g ratio {:?}", e.name, lim.verdict);
        }
    }
}

#[test]
fn densities_never_get_a_wrong_class() {
    for e in catalog() {
        let (Some(d), Some(truth)) = (e.distribution.density(), &e.density_truth) else {
            continue;
        };
        let c = classify_tail(d, None, &ClassifyOptions::with_grid(e.grid()));
        let ok = same_class(&c.variant, &truth.variant) || c.is_undetermined();
        assert!(ok, "{}: density {} vs {}", e.name, c.summary(), truth.summary());
    }
}

#[test]
fn samplers_match_survival() {
    const M: usize = 100_000;
    for e in catalog() {
        let Some(_) = e.distribution.sampler() else { continue };
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut xs: Vec<f64> = (0..M).map(|_| e.distribution.sample(rng.random::<f64>()).unwrap()).collect();
        xs.sort_by(f64::total_cmp);
        // Probes at the empirical 0.5, 0.8, 0.9, 0.95 and 0.99 quantiles, kept
        // above t0.
        for q in [0.5, 0.8, 0.9, 0.95, 0.99] {
            let t = xs[(q * M as f64) as usize].max(e.survival().t0());
            let emp = xs.iter().filter(|&&x| x > t).count() as f64 / M as f64;
            let p = e.survival().eval(t).unwrap();
            let se = (p * (1.0 - p) / M as f64).sqrt();
            assert!((emp - p).abs() <= 3.0 * se + 1.0 / M as f64, "{} at t = {t}: {emp} vs {p}", e.name);
        }
    }
}

#[test]
fn analytic_derivatives_match_central_differences() {
    for e in catalog() {
        let f = e.survival();
        if !f.has_analytic_deriv() {
            continue;
        }
        let base = f.t0().max(1.0);
        for t in [base + 0.5, base + 1.0, 2.0 * base + 1.5, 4.0 * base + 2.0, 6.0 * base + 3.0] {
            let h = t * 1e-6;
            let cd = (f.eval(t + h).unwrap() - f.eval(t - h).unwrap()) / (2.0 * h);
            let d = f.deriv(t).unwrap();
            assert!((d - cd).abs() / (1.0 + d.abs()) <= 1e-5, "{} at {t}: {d} vs {cd}", e.name);
        }
    }
}

#[test]
fn lookup_by_name() {
    let e = catalog::by_name("weibull_hazard", &[("k".into(), 2.0)]).unwrap();
    assert_eq!(e.name, "WeibullHazard(2)");
    assert!(catalog::by_name("weibull_hazard", &[]).is_err());
    assert!(catalog::by_name("cauchy", &[]).is_err());
}
