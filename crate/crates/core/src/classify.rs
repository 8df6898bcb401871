//! Limit-based membership tests and the fused tail classification.

use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::funcmodel::TailFunction;
use crate::hazard::{head_integral_ratio, tail_integral_ratio};
use crate::numlimit::{
    estimate_limit_fitted, estimate_sequence, LimitEstimate, LimitOptions, ProbeGrid, Verdict,
};

/// Default symmetric x-grid for additive (Γ) checks.
pub const GAMMA_XS: [f64; 6] = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
/// Default multiplicative x-grid for regular-variation checks.
pub const RV_XS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
/// Default x-grid for Potter bounds.
pub const POTTER_XS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
/// Default x-grid for the de Haan rapid-variation check.
pub const DEHAAN_XS: [f64; 3] = [0.5, 2.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RapidSign {
    /// `f(tx)/f(t) → ∞` for `x < 1` and `→ 0` for `x > 1`.
    MinusInfinity,
    /// The mirrored pattern.
    PlusInfinity,
}

impl fmt::Display for RapidSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RapidSign::MinusInfinity => write!(f, "-inf"),
            RapidSign::PlusInfinity => write!(f, "+inf"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum TailVariant {
    Slow,
    Regular {
        rho: f64,
    },
    /// `f ∈ Γ_α(g)` normalized to `α = ±1`; `scale` is the `|α̂|` that was
    /// divided out of `g`.
    Gamma {
        alpha: f64,
        g: TailFunction,
        scale: f64,
    },
    RapidDeHaan(RapidSign),
    Undetermined,
}

/// One sub-test behind a classification.
#[derive(Debug, Clone)]
pub struct Evidence {
    pub test: String,
    pub estimate: Option<LimitEstimate>,
    pub passed: Option<bool>,
    pub detail: String,
}

impl Evidence {
    fn limit(test: impl Into<String>, estimate: LimitEstimate) -> Self {
        Self {
            test: test.into(),
            estimate: Some(estimate),
            passed: None,
            detail: String::new(),
        }
    }

    fn check(test: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            test: test.into(),
            estimate: None,
            passed: Some(passed),
            detail: detail.into(),
        }
    }

    /// Verdict column for tables: the limit verdict or pass/fail.
    pub fn verdict_text(&self) -> String {
        match (&self.estimate, self.passed) {
            (Some(e), _) => match e.verdict {
                Verdict::Finite(_) => "Finite".into(),
                v => v.to_string(),
            },
            (None, Some(true)) => "pass".into(),
            (None, Some(false)) => "fail".into(),
            (None, None) => "-".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TailClass {
    pub variant: TailVariant,
    pub evidence: Vec<Evidence>,
}

impl TailClass {
    /// A class with no supporting evidence (ground truth).
    pub fn truth(variant: TailVariant) -> Self {
        Self {
            variant,
            evidence: Vec::new(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.variant {
            TailVariant::Slow => "Slow",
            TailVariant::Regular { .. } => "Regular",
            TailVariant::Gamma { .. } => "Gamma",
            TailVariant::RapidDeHaan(_) => "RapidDeHaan",
            TailVariant::Undetermined => "Undetermined",
        }
    }

    pub fn is_undetermined(&self) -> bool {
        matches!(self.variant, TailVariant::Undetermined)
    }

    /// `ρ` for regular variation (0 when slow), `α·|α̂|` for Γ classes.
    pub fn index(&self) -> Option<f64> {
        match &self.variant {
            TailVariant::Slow => Some(0.0),
            TailVariant::Regular { rho } => Some(*rho),
            TailVariant::Gamma { alpha, scale, .. } => Some(alpha * scale),
            _ => None,
        }
    }

    pub fn aux(&self) -> Option<&TailFunction> {
        match &self.variant {
            TailVariant::Gamma { g, .. } => Some(g),
            _ => None,
        }
    }

    /// One-line verdict, e.g. `Regular, rho = -2.00`.
    pub fn summary(&self) -> String {
        match &self.variant {
            TailVariant::Slow => "Slow".into(),
            TailVariant::Regular { rho } => format!("Regular, rho = {rho:.2}"),
            TailVariant::Gamma { alpha, g, scale } => {
                format!("Gamma, alpha = {alpha}, g = {} (scale {scale:.4})", g.label())
            }
            TailVariant::RapidDeHaan(s) => format!("RapidDeHaan({s})"),
            TailVariant::Undetermined => "Undetermined".into(),
        }
    }
}

/// Knobs shared by the classifiers.
#[derive(Debug, Clone)]
pub struct ClassifyOptions {
    pub grid: ProbeGrid,
    pub limit: LimitOptions,
    pub gamma_xs: Vec<f64>,
    pub rv_xs: Vec<f64>,
    pub dehaan_xs: Vec<f64>,
    pub potter_xs: Vec<f64>,
    pub potter_eps: f64,
    /// `|ρ̂|` at or below this is treated as slow variation.
    pub slow_band: f64,
    /// Tolerance on `|log(limit)/x − α̂|` in the Γ ratio check.
    pub gamma_consistency: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            grid: ProbeGrid::default(),
            limit: LimitOptions::default(),
            gamma_xs: GAMMA_XS.to_vec(),
            rv_xs: RV_XS.to_vec(),
            dehaan_xs: DEHAAN_XS.to_vec(),
            potter_xs: POTTER_XS.to_vec(),
            potter_eps: 0.1,
            slow_band: 1e-2,
            gamma_consistency: 1e-2,
        }
    }
}

impl ClassifyOptions {
    pub fn with_grid(grid: ProbeGrid) -> Self {
        Self {
            grid,
            ..Self::default()
        }
    }
}

/// `grid` moved right if it starts at or below `t0`.
pub fn grid_above(grid: ProbeGrid, t0: f64) -> ProbeGrid {
    if grid.start() > t0 {
        return grid;
    }
    let start = if t0 > 0.0 { 2.0 * t0 } else { 1.0 };
    grid.starting_at(start).unwrap_or(grid)
}

fn nan_on_err(r: Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

/// Limit of `t·f'(t)/f(t)`.
pub fn von_mises_index(f: &TailFunction, grid: ProbeGrid, opts: &LimitOptions) -> LimitEstimate {
    let grid = grid_above(grid, f.t0());
    estimate_limit_fitted(|t| nan_on_err(f.log_deriv(t).map(|d| t * d)), grid, opts)
}

/// Limit of `g(t)·f'(t)/f(t)`.
pub fn gamma_index(f: &TailFunction, g: &TailFunction, grid: ProbeGrid, opts: &LimitOptions) -> LimitEstimate {
    let grid = grid_above(grid, f.t0().max(g.t0()));
    estimate_limit_fitted(
        |t| match (g.ln_eval(t), f.log_deriv(t)) {
            (Ok(lg), Ok(d)) => lg.exp() * d,
            _ => f64::NAN,
        },
        grid,
        opts,
    )
}

/// Suffix of `grid` on which `t + x·g(t) ≥ t0` for every `x`, plus the number
/// of skipped probes.
fn admissible_suffix(grid: ProbeGrid, g: &TailFunction, xs: &[f64], t0: f64) -> (Option<ProbeGrid>, usize) {
    let xmin = xs.iter().cloned().fold(0.0_f64, f64::min);
    let ok = |t: f64| match g.eval(t) {
        Ok(gt) => t + xmin * gt >= t0,
        Err(_) => true,
    };
    let n = grid.count();
    let mut first = n;
    while first > 0 && ok(grid.point(first - 1)) {
        first -= 1;
    }
    if first == 0 {
        return (Some(grid), 0);
    }
    if n - first < ProbeGrid::MIN_COUNT {
        return (None, first);
    }
    (ProbeGrid::new(grid.point(first), grid.ratio(), n - first).ok(), first)
}

#[derive(Debug, Clone)]
pub struct SelfNeglectReport {
    pub passed: bool,
    /// `max_x |g(t+x·g(t))/g(t) − 1|` at the largest probe.
    pub ratio_residual: f64,
    pub gt_over_t: LimitEstimate,
    pub ratio_limits: Vec<(f64, LimitEstimate)>,
    /// Probes dropped because `t + x·g(t)` fell below `t0`.
    pub skipped: usize,
}

/// Tests `g(t)/t → 0` and `g(t + x·g(t))/g(t) → 1` on `xs`.
pub fn check_self_neglecting(
    g: &TailFunction,
    xs: &[f64],
    grid: ProbeGrid,
    opts: &LimitOptions,
) -> SelfNeglectReport {
    let base = grid_above(grid, g.t0());
    let gt_over_t = estimate_limit_fitted(|t| nan_on_err(g.ln_eval(t)).exp() / t, base, opts);
    let (sub, skipped) = admissible_suffix(base, g, xs, g.t0());
    let Some(sub) = sub else {
        return SelfNeglectReport {
            passed: false,
            ratio_residual: f64::INFINITY,
            gt_over_t,
            ratio_limits: Vec::new(),
            skipped,
        };
    };
    let ratio = |t: f64, x: f64| -> f64 {
        let r = g.eval(t).and_then(|gt| g.log_increment(t, x * gt));
        nan_on_err(r).exp()
    };
    let ratio_limits: Vec<(f64, LimitEstimate)> = xs
        .iter()
        .map(|&x| (x, estimate_limit_fitted(|t| ratio(t, x), sub, opts)))
        .collect();
    let last = ratio_limits
        .iter()
        .map(|(_, e)| e.grid.last())
        .fold(sub.last(), f64::min);
    let ratio_residual = xs
        .iter()
        .map(|&x| (ratio(last, x) - 1.0).abs())
        .fold(0.0, f64::max);
    let passed = gt_over_t.is_finite_near(0.0, opts.tol)
        && ratio_limits.iter().all(|(_, e)| e.is_finite_near(1.0, opts.tol))
        && ratio_residual <= opts.tol;
    SelfNeglectReport {
        passed,
        ratio_residual,
        gt_over_t,
        ratio_limits,
        skipped,
    }
}

#[derive(Debug, Clone)]
pub struct GammaRatioReport {
    pub limits: Vec<(f64, LimitEstimate)>,
    /// `max_x |log(limit)/x − α̂|` over finite, positive limits.
    pub consistency: f64,
    pub skipped: usize,
}

impl GammaRatioReport {
    /// `x` values whose limit agrees with `α̂` to within `tol`.
    pub fn agreeing(&self, alpha: f64, tol: f64) -> Vec<f64> {
        self.limits
            .iter()
            .filter_map(|(x, e)| {
                let v = e.value()?;
                (v > 0.0 && (v.ln() / x - alpha).abs() <= tol).then_some(*x)
            })
            .collect()
    }
}

/// Limits of `f(t + x·g(t))/f(t)` for each `x`.
pub fn gamma_ratio_check(
    f: &TailFunction,
    g: &TailFunction,
    xs: &[f64],
    alpha_hat: f64,
    grid: ProbeGrid,
    opts: &LimitOptions,
) -> GammaRatioReport {
    let base = grid_above(grid, f.t0().max(g.t0()));
    let (sub, skipped) = admissible_suffix(base, g, xs, f.t0());
    let Some(sub) = sub else {
        return GammaRatioReport {
            limits: Vec::new(),
            consistency: f64::INFINITY,
            skipped,
        };
    };
    let limits: Vec<(f64, LimitEstimate)> = xs
        .iter()
        .map(|&x| {
            let e = estimate_limit_fitted(
                |t| nan_on_err(g.eval(t).and_then(|gt| f.log_increment(t, x * gt))).exp(),
                sub,
                opts,
            );
            (x, e)
        })
        .collect();
    let consistency = limits
        .iter()
        .map(|(x, e)| match e.value() {
            Some(v) if v > 0.0 => (v.ln() / x - alpha_hat).abs(),
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    GammaRatioReport {
        limits,
        consistency,
        skipped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeHaanOutcome {
    Rapid(RapidSign),
    NotRapid,
    Undetermined,
}

#[derive(Debug, Clone)]
pub struct DeHaanReport {
    pub outcome: DeHaanOutcome,
    /// Limits of `log f(tx) − log f(t)`.
    pub log_limits: Vec<(f64, LimitEstimate)>,
}

/// Evaluates `f(tx)/f(t)` (through its logarithm) and matches the de Haan
/// patterns.
pub fn dehaan_rapid_check(f: &TailFunction, xs: &[f64], grid: ProbeGrid, opts: &LimitOptions) -> DeHaanReport {
    let base = grid_above(grid, f.t0());
    let log_limits: Vec<(f64, LimitEstimate)> = xs
        .iter()
        .map(|&x| (x, estimate_limit_fitted(|t| nan_on_err(f.log_ratio(t, x)), base, opts)))
        .collect();
    // +1: ratio → ∞, −1: ratio → 0, 0: finite nonzero, None: undetermined
    let signs: Vec<(f64, Option<i8>)> = log_limits
        .iter()
        .map(|(x, e)| {
            let s = match e.verdict {
                Verdict::PlusInfinity => Some(1),
                Verdict::MinusInfinity => Some(-1),
                Verdict::Finite(_) => Some(0),
                Verdict::Undetermined => None,
            };
            (*x, s)
        })
        .collect();
    let matches = |below: i8, above: i8| {
        signs.iter().all(|(x, s)| match s {
            Some(s) if *x < 1.0 => *s == below,
            Some(s) => *s == above,
            None => false,
        })
    };
    let has_both_sides = xs.iter().any(|&x| x < 1.0) && xs.iter().any(|&x| x > 1.0);
    let outcome = if has_both_sides && matches(1, -1) {
        DeHaanOutcome::Rapid(RapidSign::MinusInfinity)
    } else if has_both_sides && matches(-1, 1) {
        DeHaanOutcome::Rapid(RapidSign::PlusInfinity)
    } else if signs.iter().any(|(_, s)| *s == Some(0)) && signs.iter().all(|(_, s)| *s != Some(1) && *s != Some(-1)) {
        DeHaanOutcome::NotRapid
    } else {
        DeHaanOutcome::Undetermined
    };
    DeHaanReport { outcome, log_limits }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KaramataSide {
    /// `t·f(t) / ∫_{t0}^t f`
    Head,
    /// `t·f(t) / ∫_t^∞ f`
    Tail,
}

/// Karamata's theorem ratios along the grid.
pub fn karamata_ratio(
    f: &TailFunction,
    side: KaramataSide,
    grid: ProbeGrid,
    opts: &LimitOptions,
) -> Result<LimitEstimate> {
    let grid = grid_above(grid, f.t0());
    let points = grid.points();
    let mut values = Vec::with_capacity(points.len());
    match side {
        KaramataSide::Head => {
            // ∫_{t0}^{t_k} f / f(t_k), accumulated across probes
            let mut acc = head_integral_ratio(f, f.t0(), points[0])?;
            values.push(points[0] / acc);
            for w in points.windows(2) {
                let (a, b) = (w[0], w[1]);
                let scale = (f.ln_eval(a)? - f.ln_eval(b)?).exp();
                acc = acc * scale + head_integral_ratio(f, a, b)?;
                values.push(b / acc);
            }
        }
        KaramataSide::Tail => {
            for &t in &points {
                values.push(t / tail_integral_ratio(f, t)?);
            }
        }
    }
    Ok(estimate_sequence(&values, grid, opts))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotterReport {
    pub passed: bool,
    /// First probe from which the bounds hold at every later probe.
    pub t_start: Option<f64>,
    /// Number of probes in that satisfied suffix.
    pub satisfied: usize,
}

/// Checks `(1−ε)x^{ρ−ε} < f(tx)/f(t) < (1+ε)x^{ρ+ε}` for `x ∈ xs` on a
/// suffix of the grid covering at least half of it.
pub fn potter_check(f: &TailFunction, rho: f64, eps: f64, xs: &[f64], grid: ProbeGrid) -> PotterReport {
    let grid = grid_above(grid, f.t0());
    let lo_c = (1.0 - eps).ln();
    let hi_c = (1.0 + eps).ln();
    let holds = |t: f64| {
        xs.iter().all(|&x| match f.log_ratio(t, x) {
            Ok(l) => {
                let lx = x.ln();
                l > lo_c + (rho - eps) * lx && l < hi_c + (rho + eps) * lx
            }
            Err(_) => false,
        })
    };
    let n = grid.count();
    let mut first = n;
    while first > 0 && holds(grid.point(first - 1)) {
        first -= 1;
    }
    let satisfied = n - first;
    PotterReport {
        passed: satisfied * 2 >= n,
        t_start: (satisfied > 0).then(|| grid.point(first)),
        satisfied,
    }
}

/// `max_x |f(t+xg) − f(t) − x·g·f'(t)| / |x·g·f'(t)|` at `t`.
pub fn taylor_error(f: &TailFunction, g: &TailFunction, xs: &[f64], t: f64) -> Result<f64> {
    let gt = g.eval(t)?;
    let dlog = f.log_deriv(t)?;
    let mut worst = 0.0_f64;
    for &x in xs {
        let inc = f.log_increment(t, x * gt)?;
        let lin = x * gt * dlog;
        worst = worst.max((inc.exp_m1() - lin).abs() / lin.abs());
    }
    Ok(worst)
}

/// `g = |f/f'|` beyond the last sign change of `f'` on the grid; `None` when
/// sign changes reach into the second half of the grid.
pub fn auxiliary_from_derivative(f: &TailFunction, grid: ProbeGrid) -> Option<TailFunction> {
    let grid = grid_above(grid, f.t0());
    let pts = grid.points();
    let signs: Vec<(f64, f64)> = pts
        .iter()
        .filter_map(|&t| f.log_deriv(t).ok().filter(|d| d.is_finite()).map(|d| (t, d.signum())))
        .collect();
    if signs.len() < ProbeGrid::MIN_COUNT {
        return None;
    }
    let last_change = signs.windows(2).rposition(|w| w[0].1 != w[1].1 || w[1].1 == 0.0);
    let t0 = match last_change {
        Some(k) if k + 1 >= signs.len() / 2 => return None,
        Some(k) => signs[k + 1].0,
        None => f.t0(),
    };
    let ff = f.clone();
    Some(TailFunction::from_log(
        format!("|f/f'| of {}", f.label()),
        t0,
        move |t| match ff.log_deriv(t) {
            Ok(d) if d != 0.0 => -d.abs().ln(),
            _ => f64::NAN,
        },
        None,
    ))
}

/// Runs the decision procedure: von Mises index, then (for rapid behaviour)
/// the Γ-class tests with a constructed or supplied auxiliary function, then
/// the de Haan pattern.
pub fn classify_tail(f: &TailFunction, g_hint: Option<&TailFunction>, opts: &ClassifyOptions) -> TailClass {
    let lopts = &opts.limit;
    let grid = opts.grid;
    let mut evidence = Vec::new();

    let vm = von_mises_index(f, grid, lopts);
    evidence.push(Evidence::limit("von_mises_index", vm.clone()));

    if let Verdict::Finite(rho) = vm.verdict {
        let variant = if rho.abs() <= opts.slow_band {
            let xs: Vec<f64> = opts.rv_xs.iter().cloned().filter(|&x| x != 1.0).collect();
            let mut ok = true;
            for &x in &xs {
                let e = estimate_limit_fitted(|t| nan_on_err(f.log_ratio(t, x)), grid_above(grid, f.t0()), lopts);
                ok &= e.is_finite_near(0.0, opts.slow_band.max(lopts.tol));
                evidence.push(Evidence::limit(format!("slow_log_ratio(x={x})"), e));
            }
            evidence.push(Evidence::check(
                "slow_band",
                ok,
                format!("|rho| = {:.3e} <= {:.1e}", rho.abs(), opts.slow_band),
            ));
            if ok {
                TailVariant::Slow
            } else {
                TailVariant::Undetermined
            }
        } else {
            let p = potter_check(f, rho, opts.potter_eps, &opts.potter_xs, grid);
            evidence.push(Evidence::check(
                "potter",
                p.passed,
                format!(
                    "eps = {}, satisfied {} probes from t = {}",
                    opts.potter_eps,
                    p.satisfied,
                    p.t_start.map_or("-".into(), |t| format!("{t:e}"))
                ),
            ));
            if p.passed {
                TailVariant::Regular { rho }
            } else {
                TailVariant::Undetermined
            }
        };
        return TailClass { variant, evidence };
    }

    // Rapid behaviour (or an undetermined index): try Γ_α(g).
    let g = match g_hint {
        Some(g) => Some(g.clone()),
        None => auxiliary_from_derivative(f, grid),
    };
    match &g {
        None => evidence.push(Evidence::check(
            "auxiliary_g",
            false,
            "derivative changes sign across the probe range",
        )),
        Some(g) => {
            let sn = check_self_neglecting(g, &opts.gamma_xs, grid, lopts);
            evidence.push(Evidence::limit("self_neglect.g_over_t", sn.gt_over_t.clone()));
            for (x, e) in &sn.ratio_limits {
                evidence.push(Evidence::limit(format!("self_neglect.ratio(x={x})"), e.clone()));
            }
            evidence.push(Evidence::check(
                "self_neglect",
                sn.passed,
                format!("ratio residual {:.3e}, skipped {}", sn.ratio_residual, sn.skipped),
            ));
            let gi = gamma_index(f, g, grid, lopts);
            evidence.push(Evidence::limit("gamma_index", gi.clone()));
            if let (true, Verdict::Finite(alpha_hat)) = (sn.passed, gi.verdict) {
                if alpha_hat.abs() > opts.slow_band {
                    let gr = gamma_ratio_check(f, g, &opts.gamma_xs, alpha_hat, grid, lopts);
                    for (x, e) in &gr.limits {
                        evidence.push(Evidence::limit(format!("gamma_ratio(x={x})"), e.clone()));
                    }
                    let agree = gr.agreeing(alpha_hat, opts.gamma_consistency);
                    let ok = agree.len() >= 3 && agree.iter().any(|&x| x < 0.0) && agree.iter().any(|&x| x > 0.0);
                    evidence.push(Evidence::check(
                        "gamma_ratio",
                        ok,
                        format!("{} of {} x agree, consistency {:.3e}", agree.len(), gr.limits.len(), gr.consistency),
                    ));
                    if ok {
                        let scale = alpha_hat.abs();
                        let gn = normalized_aux(g, scale);
                        return TailClass {
                            variant: TailVariant::Gamma {
                                alpha: alpha_hat.signum(),
                                g: gn,
                                scale,
                            },
                            evidence,
                        };
                    }
                }
            }
        }
    }

    let dh = dehaan_rapid_check(f, &opts.dehaan_xs, grid, lopts);
    for (x, e) in &dh.log_limits {
        evidence.push(Evidence::limit(format!("dehaan_log_ratio(x={x})"), e.clone()));
    }
    let variant = match dh.outcome {
        DeHaanOutcome::Rapid(s) => TailVariant::RapidDeHaan(s),
        _ => TailVariant::Undetermined,
    };
    TailClass { variant, evidence }
}

/// `g / scale`.
fn normalized_aux(g: &TailFunction, scale: f64) -> TailFunction {
    if scale == 1.0 {
        return g.clone();
    }
    let ls = scale.ln();
    let gg = g.clone();
    let dlog = g.has_analytic_deriv().then(|| {
        let gd = g.clone();
        Arc::new(move |t: f64| gd.log_deriv(t).unwrap_or(f64::NAN)) as Arc<dyn Fn(f64) -> f64 + Send + Sync>
    });
    TailFunction::from_log(
        format!("{}/{scale:.6}", g.label()),
        g.t0(),
        move |t| gg.ln_eval(t).map_or(f64::NAN, |v| v - ls),
        dlog,
    )
}
