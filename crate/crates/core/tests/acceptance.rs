use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tailvar::classify::{
    classify_tail, karamata_ratio, potter_check, taylor_error, ClassifyOptions, KaramataSide, TailClass, TailVariant,
};
use tailvar::evt::{domain_of_attraction, evt_report, Domain};
use tailvar::funcmodel::catalog::{self, catalog, CatalogEntry};
use tailvar::funcmodel::expr::Expr;
use tailvar::funcmodel::{TailFunction, Transform};
use tailvar::hazard::hazard_rate;
use tailvar::inverses::{pi_functional, PiOptions, PiReport, PiRoute};
use tailvar::numlimit::{estimate_limit, estimate_sequence, LimitOptions, ProbeGrid};
use tailvar::represent::{gamma_decompose, karamata_decompose, RepresentOptions};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const SEED: u64 = 7;
const BLOCKS: usize = 2000;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|x| x.to_string())
}

fn same_class(a: &TailVariant, b: &TailVariant) -> bool {
    match (a, b) {
        (TailVariant::Slow, TailVariant::Slow) => true,
        (TailVariant::Regular { rho: x }, TailVariant::Regular { rho: y }) => (x - y).abs() <= 1e-2,
        (TailVariant::Gamma { alpha: x, .. }, TailVariant::Gamma { alpha: y, .. }) => x == y,
        (TailVariant::RapidDeHaan(x), TailVariant::RapidDeHaan(y)) => x == y,
        _ => false,
    }
}

fn gamma_index_value(c: &TailClass) -> Option<f64> {
    c.evidence
        .iter()
        .find(|ev| ev.test == "gamma_index")
        .and_then(|ev| ev.estimate.as_ref())
        .and_then(|est| est.value())
}

fn classification() -> Outcome {
    let start = Instant::now();
    let mut worst_ratio = 0.0_f64;
    for entry in catalog() {
        let opts = ClassifyOptions::with_grid(entry.grid());
        let c = classify_tail(entry.survival(), None, &opts);
        ensure(same_class(&c.variant, &entry.truth.variant), || {
            format!("{}: {} vs {}", entry.name, c.summary(), entry.truth.summary())
        })?;
        if let (Some(g_hat), Some(g)) = (c.aux(), &entry.truth_aux) {
            let lim = estimate_limit(
                |t| match (g_hat.ln_eval(t), g.ln_eval(t)) {
                    (Ok(a), Ok(b)) => (a - b).exp(),
                    _ => f64::NAN,
                },
                opts.grid,
                &LimitOptions::with_tol(1e-2),
            );
            ensure(lim.is_finite_near(1.0, 1e-2), || format!("{}: g ratio {:?}", entry.name, lim.verdict))?;
            worst_ratio = worst_ratio.max((lim.value().unwrap_or(f64::NAN) - 1.0).abs());
        }
        if entry.name == "StandardNormal" {
            let gi = gamma_index_value(&c).ok_or("StandardNormal: no gamma_index")?;
            ensure((gi + 1.0).abs() <= 1e-2, || format!("StandardNormal gamma_index {gi}"))?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs <= 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{} entries, worst |g ratio - 1| {worst_ratio:.2e}, {secs:.2} s", catalog().len()))
}

fn von_mises_rate() -> Outcome {
    let n = e(catalog::standard_normal())?;
    let h = e(hazard_rate(&n.distribution))?;
    let grid = n.grid();
    let values: Vec<f64> = grid.points().iter().map(|&t| h.eval(t).map_or(f64::NAN, |v| v / t)).collect();
    let est = estimate_sequence(&values, grid, &LimitOptions::default());
    let last = *values.last().unwrap();
    ensure(est.is_finite_near(1.0, 1e-2), || format!("h(t)/t limit {:?}", est.verdict))?;
    ensure((last - 1.0).abs() <= 1e-2, || format!("h(t)/t = {last} at t = {}", grid.last()))?;
    Ok(format!("limit {:.6}, last probe {last:.12}", est.value().unwrap()))
}

fn karamata_theorem() -> Outcome {
    let grid = ProbeGrid::default();
    let opts = LimitOptions::default();
    let head = e(karamata_ratio(&TailFunction::power_law(1.0, 2.0, 1.0), KaramataSide::Head, grid, &opts))?;
    ensure(head.is_finite_near(3.0, 1e-3), || format!("head ratio {:?}", head.verdict))?;
    let tail = e(karamata_ratio(&TailFunction::power_law(1.0, -3.0, 1.0), KaramataSide::Tail, grid, &opts))?;
    ensure(tail.is_finite_near(2.0, 1e-3), || format!("tail ratio {:?}", tail.verdict))?;
    let lt = e(catalog::log_tail())?;
    let dens = lt.distribution.density().ok_or("LogTail has no density")?;
    let slow = e(karamata_ratio(dens, KaramataSide::Tail, grid, &LimitOptions::with_tol(1e-2)))?;
    ensure(slow.is_finite_near(0.0, 1e-2), || format!("LogTail tail ratio {:?}", slow.verdict))?;
    Ok(format!(
        "head {:.8}, tail {:.8}, LogTail {:.2e}",
        head.value().unwrap(),
        tail.value().unwrap(),
        slow.value().unwrap()
    ))
}

fn representations() -> Outcome {
    let opts = RepresentOptions::default();
    let cases: [(CatalogEntry, f64, f64); 5] = [
        (e(catalog::pareto(2.0))?, -2.0, 1.0),
        (e(catalog::pareto(3.0))?, -3.0, 1.0),
        (e(catalog::frechet(2.0))?, -2.0, 1.0),
        (e(catalog::frechet(3.5))?, -3.5, 1.0),
        (e(catalog::log_tail())?, 0.0, std::f64::consts::E),
    ];
    let mut worst = 0.0_f64;
    for (entry, rho, t0) in &cases {
        let r = e(karamata_decompose(entry.survival(), *rho, *t0, &opts))?;
        ensure(r.calibration_residual <= 1e-6, || {
            format!("{}: calibration residual {:.2e}", entry.name, r.calibration_residual)
        })?;
        ensure(r.trend_halves(), || format!("{}: epsilon trend does not halve", entry.name))?;
        worst = worst.max(r.calibration_residual);
    }
    let n = e(catalog::standard_normal())?;
    let g = TailFunction::power_law(1.0, -1.0, 1.0);
    let r = e(gamma_decompose(n.survival(), -1.0, &g, 1.0, &opts))?;
    let fin = r.final_trend();
    ensure(fin.abs() <= 1e-2, || format!("normal g A'/A final sample {fin:.3e}"))?;
    Ok(format!("worst calibration residual {worst:.2e}, normal g A'/A final {fin:.2e}"))
}

/// Regularly varying functions with known index.
fn regular(k: usize, p: f64) -> Result<(TailFunction, f64), String> {
    Ok(match k % 4 {
        0 => (e(catalog::pareto(p))?.survival().clone(), -p),
        1 => (e(catalog::frechet(p))?.survival().clone(), -p),
        2 => (e(e(Expr::parse(&format!("t^-{p} * log(t)")))?.into_tail_function("t^-p log t", 2.0))?, -p),
        _ => (e(e(Expr::parse(&format!("t^{p} / (1 + 1/t)")))?.into_tail_function("t^p/(1+1/t)", 1.0))?, p),
    })
}

fn index(f: &TailFunction) -> Result<f64, String> {
    classify_tail(f, None, &ClassifyOptions::default())
        .index()
        .ok_or_else(|| format!("{}: no index", f.label()))
}

fn closure_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let (k, p, beta) = (rng.random_range(0..4), rng.random_range(0.5..3.0), rng.random_range(0.25..3.0));
        let (f, _) = regular(k, p)?;
        let fb = e(f.transform(Transform::Power(beta)))?;
        let gap = (index(&fb)? - beta * index(&f)?).abs();
        ensure(gap <= 2e-2, || format!("power law: {} ^ {beta}: gap {gap:.3e}", f.label()))?;
        worst = worst.max(gap);
    }
    for _ in 0..10 {
        let (f1, _) = regular(rng.random_range(0..4), rng.random_range(0.5..3.0))?;
        let (f2, _) = regular(rng.random_range(0..4), rng.random_range(0.5..3.0))?;
        let t0 = f1.t0().max(f2.t0());
        let prod = e(f1.clone().with_t0(t0).transform(Transform::Product(f2.clone().with_t0(t0))))?;
        let gap = (index(&prod)? - index(&f1)? - index(&f2)?).abs();
        ensure(gap <= 2e-2, || format!("product {} * {}: gap {gap:.3e}", f1.label(), f2.label()))?;
        worst = worst.max(gap);
    }
    for _ in 0..5 {
        let (f1, _) = regular(rng.random_range(0..4), rng.random_range(0.5..2.0))?;
        let p2: f64 = rng.random_range(0.5..2.0);
        let inner = e(e(Expr::parse(&format!("t^{p2} * log(t + 1)")))?.into_tail_function("inner", 1.0))?;
        let comp = e(f1.transform(Transform::Compose(inner.clone())))?;
        let gap = (index(&comp)? - index(&f1)? * index(&inner)?).abs();
        ensure(gap <= 2e-2, || format!("composition {} o inner: gap {gap:.3e}", f1.label()))?;
        worst = worst.max(gap);
    }
    Ok(format!("35 cases, worst gap {worst:.2e}"))
}

fn potter() -> Outcome {
    const XS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
    let lt = e(catalog::log_tail())?;
    let lt_density = lt.distribution.density().ok_or("LogTail has no density")?.clone();
    let cases = [
        (e(catalog::pareto(2.0))?.survival().clone(), -2.0),
        (e(catalog::pareto(3.0))?.survival().clone(), -3.0),
        (e(catalog::frechet(2.0))?.survival().clone(), -2.0),
        (e(catalog::frechet(3.5))?.survival().clone(), -3.5),
        (lt_density, -1.0),
    ];
    let grid = ProbeGrid::default();
    for (f, rho) in &cases {
        let r = potter_check(f, *rho, 0.1, &XS, grid);
        ensure(r.passed, || format!("{} fails: {r:?}", f.label()))?;
    }
    let decay = TailFunction::from_log("exp(-t)", 0.0, |t| -t, Some(Arc::new(|_| -1.0)));
    for rho in [-4.0, -2.0, -1.0, 0.0] {
        ensure(!potter_check(&decay, rho, 0.1, &XS, grid).passed, || format!("e^-t passes with rho = {rho}"))?;
    }
    Ok("5 regular entries pass, e^-t fails for rho in {-4, -2, -1, 0}".into())
}

fn pi_gap(r: &PiReport) -> f64 {
    r.pi_limits
        .iter()
        .map(|(x, est)| est.value().map_or(f64::INFINITY, |v| (v - r.target(*x)).abs()))
        .fold(0.0, f64::max)
}

fn pi_class() -> Outcome {
    let opts = PiOptions::default();
    let exp = TailFunction::from_log("e^t", 0.0, |t| t, Some(Arc::new(|_| 1.0)));
    let one = TailFunction::constant(1.0, 0.0);
    let r = e(pi_functional(&exp, 1.0, Some(&one), &opts))?;
    let gap = pi_gap(&r);
    ensure(gap <= 1e-12, || format!("exp/log gap {gap:.3e}"))?;

    let root = TailFunction::from_log("exp(sqrt t)", 0.0, |t: f64| t.sqrt(), Some(Arc::new(|t: f64| 0.5 / t.sqrt())));
    let g = TailFunction::power_law(2.0, 0.5, 0.0);
    let r2 = e(pi_functional(&root, 1.0, Some(&g), &opts))?;
    let gap2 = pi_gap(&r2);
    ensure(gap2 <= 1e-2 && r2.pi_limits.len() == 3, || format!("exp(sqrt t) gap {gap2:.3e}"))?;

    let n = e(catalog::standard_normal())?;
    let nopts = PiOptions {
        tol: 5e-2,
        ..PiOptions::default()
    };
    let r3 = e(pi_functional(n.survival(), 8.0, None, &nopts))?;
    ensure(r3.route == PiRoute::Decreasing, || format!("normal route {:?}", r3.route))?;
    let gap3 = pi_gap(&r3);
    ensure(gap3 <= 5e-2, || format!("normal -log x gap {gap3:.3e}"))?;
    Ok(format!("gaps: exp {gap:.1e}, exp(sqrt t) {gap2:.2e}, normal {gap3:.2e}"))
}

fn evt() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    for (entry, ns, bound, want) in [
        (e(catalog::exponential(1.0))?, vec![1000], 0.03, Domain::Gumbel),
        (e(catalog::pareto(2.0))?, vec![1000], 0.03, Domain::Frechet(2.0)),
        (e(catalog::standard_normal())?, vec![100, 1000, 10_000], 0.08, Domain::Gumbel),
    ] {
        let (domain, _) = domain_of_attraction(&entry.distribution);
        let matches = match (domain, want) {
            (Domain::Frechet(a), Domain::Frechet(b)) => (a - b).abs() <= 1e-2,
            (a, b) => a == b,
        };
        ensure(matches, || format!("{}: domain {domain}", entry.name))?;
        let r = e(evt_report(&entry.distribution, domain, &ns, BLOCKS, SEED))?;
        let n = *ns.last().unwrap();
        let ks = r.ks_at(n).unwrap();
        ensure(ks <= bound, || format!("{} n = {n}: KS {ks:.4} > {bound}", entry.name))?;
        if ns.len() > 1 {
            let first = r.ks_at(ns[0]).unwrap();
            ensure(ks < first, || format!("{}: KS({n}) = {ks:.4} not below KS({}) = {first:.4}", entry.name, ns[0]))?;
        }
        parts.push(format!("{} KS({n}) = {ks:.4}", entry.name));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs <= 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{}, {secs:.2} s", parts.join(", ")))
}

/// Every CSV artifact of a full run, concatenated with file markers.
fn artifacts() -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    let section = |name: &str, out: &mut Vec<u8>| out.extend_from_slice(format!("== {name}\n").as_bytes());

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    e(w.write_record(["entry", "test", "verdict", "value", "residual"]))?;
    for entry in catalog() {
        let c = classify_tail(entry.survival(), None, &ClassifyOptions::with_grid(entry.grid()));
        for ev in &c.evidence {
            let (v, r) = ev.estimate.as_ref().map_or((None, None), |x| (x.value(), Some(x.residual)));
            let s = |x: Option<f64>| x.map(|y| y.to_string()).unwrap_or_default();
            e(w.write_record([entry.name.as_str(), &ev.test, &ev.verdict_text(), &s(v), &s(r)]))?;
        }
    }
    section("evidence.csv", &mut out);
    out.extend(e(w.into_inner().map_err(|x| x.into_error()))?);

    let opts = RepresentOptions::default();
    let p = e(catalog::pareto(2.0))?;
    section("representation_pareto.csv", &mut out);
    e(e(karamata_decompose(p.survival(), -2.0, 1.0, &opts))?.write_csv(&mut out))?;
    let n = e(catalog::standard_normal())?;
    let g = TailFunction::power_law(1.0, -1.0, 1.0);
    section("representation_normal.csv", &mut out);
    e(e(gamma_decompose(n.survival(), -1.0, &g, 1.0, &opts))?.write_csv(&mut out))?;

    for entry in [e(catalog::exponential(1.0))?, p, n] {
        let (domain, _) = domain_of_attraction(&entry.distribution);
        let r = e(evt_report(&entry.distribution, domain, &[100, 1000], 500, SEED))?;
        section(&format!("evt {}", entry.name), &mut out);
        e(r.write_csv(&mut out))?;
        section(&format!("maxima {}", entry.name), &mut out);
        e(r.write_maxima_csv(&mut out))?;
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let a = artifacts()?;
    let b = artifacts()?;
    ensure(a == b, || {
        let at = a.iter().zip(&b).position(|(x, y)| x != y).unwrap_or(a.len().min(b.len()));
        format!("runs differ at byte {at}")
    })?;
    Ok(format!("{} bytes identical", a.len()))
}

fn taylor() -> Outcome {
    // f = -log F̄ has f' = h ∈ Γ_0(1/t).
    let n = e(catalog::standard_normal())?;
    let surv = n.survival().clone();
    let h = e(hazard_rate(&n.distribution))?;
    let (s1, s2) = (surv.clone(), surv.clone());
    let f = TailFunction::from_log(
        "-log normal survival",
        1.0,
        move |t| (-s1.ln_eval(t).unwrap_or(f64::NAN)).ln(),
        Some(Arc::new(move |t| {
            h.eval(t).unwrap_or(f64::NAN) / -s2.ln_eval(t).unwrap_or(f64::NAN)
        })),
    );
    let g = TailFunction::power_law(1.0, -1.0, 1.0);
    let xs = [-1.0, -0.5, -0.25, 0.25, 0.5, 1.0];
    // Largest probe whose shifts x·g(t) still carry 8 digits relative to t.
    let t = n
        .grid()
        .points()
        .into_iter()
        .rev()
        .find(|&t| 0.25 / t >= 1e-8 * t)
        .ok_or("no resolvable probe")?;
    let err = e(taylor_error(&f, &g, &xs, t))?;
    ensure(err <= 0.05, || format!("relative error {err:.3e} at t = {t}"))?;
    let far = n.grid().last();
    let err_far = e(taylor_error(&f, &g, &xs, far))?;
    ensure(err_far <= 0.05, || format!("relative error {err_far:.3e} at t = {far:.3e}"))?;
    Ok(format!("relative error {err:.2e} at t = {t}, {err_far:.2e} at t = {far:.3e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("classification suite", classification),
        ("von Mises divergence rate", von_mises_rate),
        ("Karamata theorem ratios", karamata_theorem),
        ("representation suite", representations),
        ("closure laws", closure_laws),
        ("Potter bounds", potter),
        ("Pi-class suite", pi_class),
        ("EVT Monte Carlo", evt),
        ("determinism", determinism),
        ("Taylor expansion", taylor),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("[PASS] {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
