//! Generalized inverses, inverse-index laws and the Π(a, b) class.

use std::sync::Arc;

use crate::classify::{grid_above, von_mises_index};
use crate::error::{Error, Result};
use crate::funcmodel::TailFunction;
use crate::hazard::BRACKET_CAP;
use crate::numlimit::{estimate_sequence, LimitEstimate, LimitOptions, ProbeGrid};
use crate::quad::{integrate, integrate_span, QuadConfig};

/// Relative width at which bisection stops.
pub const INVERSE_RESOLUTION: f64 = 1e-15;
/// Largest share of probe pairs allowed to break monotonicity.
const MONOTONE_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `f^←(s) = inf{t: f(t) ≥ s}` for increasing `f`.
    Left,
    /// `f^→(x) = inf{t: f(t) ≤ x}` for decreasing `f`.
    Right,
}

/// A generalized inverse evaluated by monotone bisection.
///
/// Both sides run through one increasing function: `f` itself for
/// [`Side::Left`] and `1/f` for [`Side::Right`], since
/// `f^→(x) = (1/f)^←(1/x)`.
#[derive(Debug, Clone)]
pub struct GeneralizedInverse {
    source: TailFunction,
    side: Side,
    bracket_cap: f64,
}

impl GeneralizedInverse {
    pub fn source(&self) -> &TailFunction {
        &self.source
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn bracket_cap(&self) -> f64 {
        self.bracket_cap
    }

    /// `ln` of the increasing function behind both sides.
    fn ln_increasing(&self, t: f64) -> Result<f64> {
        let v = self.source.ln_eval_extended(t)?;
        Ok(match self.side {
            Side::Left => v,
            Side::Right => -v,
        })
    }

    /// Smallest `t ≥ t0` with `ln_increasing(t) ≥ level`, to relative
    /// [`INVERSE_RESOLUTION`].
    fn bisect(&self, level: f64) -> Result<f64> {
        let t0 = self.source.t0();
        if self.ln_increasing(t0)? >= level {
            return Ok(t0);
        }
        let mut lo = t0;
        let mut gap = t0.abs().max(1.0);
        let mut hi = t0 + gap;
        while self.ln_increasing(hi)? < level {
            if hi >= self.bracket_cap {
                return Err(Error::BracketCap {
                    label: self.source.label().to_string(),
                    level: level.exp(),
                    cap: self.bracket_cap,
                });
            }
            lo = hi;
            gap *= 2.0;
            hi = (t0 + gap).min(self.bracket_cap);
        }
        while hi - lo > INVERSE_RESOLUTION * hi.abs().max(f64::MIN_POSITIVE) {
            let mid = lo + 0.5 * (hi - lo);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.ln_increasing(mid)? >= level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// The inverse at `y`.
    pub fn eval(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::InvalidArgument(format!("inverse level must be positive, got {y}")));
        }
        self.eval_log(y.ln())
    }

    /// The inverse at `y = e^{ln_y}`; reaches levels beyond the `f64` range.
    pub fn eval_log(&self, ln_y: f64) -> Result<f64> {
        match self.side {
            Side::Left => self.bisect(ln_y),
            Side::Right => self.bisect(-ln_y),
        }
    }

    /// `v(t)`: `f^←(t)` on the left side and `f^→(1/t)` on the right side.
    /// Increasing in `t` either way.
    pub fn increasing_form(&self, t: f64) -> Result<f64> {
        self.bisect(t.ln())
    }

    /// [`increasing_form`](Self::increasing_form) as a tail function on
    /// `[t0, ∞)`. Its log-derivative `1/(v·t·(ln f)'(v))` is exact wherever
    /// `f` is differentiable and strictly monotone.
    pub fn increasing_function(&self, t0: f64) -> TailFunction {
        let (a, b) = (self.clone(), self.clone());
        let sign = match self.side {
            Side::Left => 1.0,
            Side::Right => -1.0,
        };
        let label = match self.side {
            Side::Left => format!("left inverse of {}", self.source.label()),
            Side::Right => format!("right inverse of {} at 1/t", self.source.label()),
        };
        TailFunction::from_log(
            label,
            t0,
            move |t| a.increasing_form(t).map(f64::ln).unwrap_or(f64::NAN),
            Some(Arc::new(move |t| {
                let Ok(v) = b.increasing_form(t) else {
                    return f64::NAN;
                };
                match b.source.log_deriv(v) {
                    Ok(d) => 1.0 / (v * t * sign * d),
                    Err(_) => f64::NAN,
                }
            })),
        )
    }
}

/// Counts probe pairs on which `f` moves against `side`'s direction.
fn monotone_violations(f: &TailFunction, side: Side, grid: ProbeGrid) -> Result<(usize, usize)> {
    let grid = grid_above(grid, f.t0());
    let vals = grid
        .points()
        .into_iter()
        .map(|t| f.ln_eval_extended(t))
        .collect::<Result<Vec<f64>>>()?;
    let bad = vals
        .windows(2)
        .filter(|w| {
            let slack = 1e-12 * w[0].abs().max(1.0);
            match side {
                Side::Left => w[1] < w[0] - slack,
                Side::Right => w[1] > w[0] + slack,
            }
        })
        .count();
    Ok((bad, vals.len() - 1))
}

/// Inverse of `f` on `side`, after checking that `f` moves the right way on
/// `grid` (no more than 5% of probe pairs may disagree).
pub fn generalized_inverse_on(f: &TailFunction, side: Side, grid: ProbeGrid) -> Result<GeneralizedInverse> {
    let (bad, pairs) = monotone_violations(f, side, grid)?;
    if bad as f64 > MONOTONE_SLACK * pairs as f64 {
        return Err(Error::NotMonotone {
            label: f.label().to_string(),
            violations: bad,
            pairs,
        });
    }
    Ok(GeneralizedInverse {
        source: f.clone(),
        side,
        bracket_cap: BRACKET_CAP,
    })
}

/// [`generalized_inverse_on`] with the default probe grid.
pub fn generalized_inverse(f: &TailFunction, side: Side) -> Result<GeneralizedInverse> {
    generalized_inverse_on(f, side, ProbeGrid::default())
}

/// Grid of levels `y` covering the image of `grid` under the increasing form of
/// `f`, clipped to `[.., 1e300]`.
fn level_grid(inv: &GeneralizedInverse, grid: ProbeGrid) -> Result<ProbeGrid> {
    let grid = grid_above(grid, inv.source.t0());
    let lo = inv.ln_increasing(grid.start())?.exp().max(f64::MIN_POSITIVE);
    let hi = inv.ln_increasing(grid.last())?.exp().min(1e300);
    if !(hi > 2.0 * lo) || !(lo > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "{} does not spread the probe range into a usable level range",
            inv.source.label()
        )));
    }
    ProbeGrid::spanning(lo.max(1e-300), hi, grid.count())
}

/// Index of the inverse of `f ∈ RV_ρ`: the von Mises limit of `f^←` (for
/// `ρ > 0`, expected `1/ρ`) or of `t ↦ f^→(1/t)` (for `ρ < 0`, expected `−1/ρ`).
pub fn inverse_index_check(f: &TailFunction, rho: f64, grid: ProbeGrid, opts: &LimitOptions) -> Result<LimitEstimate> {
    let side = if rho > 0.0 {
        Side::Left
    } else if rho < 0.0 {
        Side::Right
    } else {
        return Err(Error::Unsupported(
            "inverse index needs ρ ≠ 0; the inverse of a slowly varying function is rapidly varying".into(),
        ));
    };
    let inv = generalized_inverse_on(f, side, grid)?;
    let levels = level_grid(&inv, grid)?;
    let v = inv.increasing_function(levels.start());
    Ok(von_mises_index(&v, levels, opts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiRoute {
    /// `f` increasing to `∞`, `v = f^←`, limit `log x`.
    Increasing,
    /// `f` decreasing to 0, `v(t) = f^→(1/t)`; reported in the form
    /// `(f^→(ux) − b(1/u))/a(1/u) → −log x` as `u → 0`.
    Decreasing,
}

#[derive(Debug, Clone)]
pub struct PiOptions {
    /// Grid of levels `t` at which `v(t)` is probed.
    pub grid: ProbeGrid,
    pub xs: Vec<f64>,
    pub tol: f64,
    pub limit: LimitOptions,
}

impl Default for PiOptions {
    fn default() -> Self {
        Self {
            grid: ProbeGrid::spanning(8.0, 1e300, 48).expect("valid default grid"),
            xs: vec![0.5, 2.0, 4.0],
            tol: 1e-2,
            limit: LimitOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PiReport {
    pub route: PiRoute,
    pub a: TailFunction,
    pub b: TailFunction,
    pub pi_limits: Vec<(f64, LimitEstimate)>,
    pub passed: bool,
}

impl PiReport {
    /// Expected limit at `x`: `log x`, or `−log x` on the decreasing route.
    pub fn target(&self, x: f64) -> f64 {
        match self.route {
            PiRoute::Increasing => x.ln(),
            PiRoute::Decreasing => -x.ln(),
        }
    }
}

/// `v(t) − t⁻¹∫_{t0}^t v(z) dz` for the increasing form `v` of `inv`.
fn integral_auxiliary(inv: GeneralizedInverse, t0: f64, domain: f64) -> TailFunction {
    let label = format!("a(t) from the inverse of {}", inv.source.label());
    TailFunction::from_log(
        label,
        domain,
        move |t| {
            let cfg = QuadConfig::with_rel_tol(1e-12);
            let value = match inv.increasing_form(t) {
                Ok(x) => x,
                Err(_) => return f64::NAN,
            };
            match integrate_span(|z| Ok(inv.increasing_form(z)? / t), t0, t, &cfg) {
                Ok(i) => (value - i.value).ln(),
                Err(_) => f64::NAN,
            }
        },
        None,
    )
}

/// Π-class functional of the inverse of `f`.
///
/// The route follows the monotonicity of `f` on `opts.grid`. With `v` the
/// increasing form of the inverse, `b = v` and `a(t) = g(v(t))` when `g` is
/// given, else `a(t) = v(t) − t⁻¹∫_{t0}^t v(z) dz`. Passes when every limit
/// over `opts.xs` is within `opts.tol` of its target.
pub fn pi_functional(f: &TailFunction, t0: f64, g: Option<&TailFunction>, opts: &PiOptions) -> Result<PiReport> {
    let f_grid = grid_above(ProbeGrid::default(), f.t0());
    let (inc, _) = monotone_violations(f, Side::Right, f_grid)?;
    let (dec, _) = monotone_violations(f, Side::Left, f_grid)?;
    let (side, route) = if dec <= inc {
        (Side::Left, PiRoute::Increasing)
    } else {
        (Side::Right, PiRoute::Decreasing)
    };
    let inv = generalized_inverse_on(f, side, f_grid)?;
    let domain = opts.grid.start().min(t0).max(f64::MIN_POSITIVE);
    let v = inv.increasing_function(domain);
    let a = match g {
        Some(g) => {
            let (vi, gg) = (inv.clone(), g.clone());
            TailFunction::from_log(
                format!("{} at the inverse", g.label()),
                domain,
                move |t| match vi.increasing_form(t) {
                    Ok(x) => gg.ln_eval(x).unwrap_or(f64::NAN),
                    Err(_) => f64::NAN,
                },
                None,
            )
        }
        None => integral_auxiliary(inv.clone(), t0, domain),
    };
    let b = v;

    // a(t) and v(t) on the grid; the integral form accumulates panel by panel
    let pts = opts.grid.points();
    let vs = pts.iter().map(|&t| inv.increasing_form(t)).collect::<Result<Vec<f64>>>()?;
    let a_vals = match g {
        Some(_) => pts.iter().map(|&t| a.eval(t)).collect::<Result<Vec<f64>>>()?,
        None => {
            let cfg = QuadConfig::with_rel_tol(1e-12);
            // running mean t⁻¹∫_{t0}^t v, kept scaled so it cannot overflow
            let mut at = t0;
            let mut mean = 0.0;
            let mut out = Vec::with_capacity(pts.len());
            for (&t, &vt) in pts.iter().zip(&vs) {
                let panel = integrate_span(|z| Ok(inv.increasing_form(z)? / t), at, t, &cfg)?.value;
                mean = mean * (at / t) + panel;
                at = t;
                out.push(vt - mean);
            }
            out
        }
    };

    let mut pi_limits = Vec::with_capacity(opts.xs.len());
    for &x in &opts.xs {
        let shift = match route {
            PiRoute::Increasing => x,
            PiRoute::Decreasing => 1.0 / x,
        };
        let values: Vec<f64> = pts
            .iter()
            .zip(vs.iter().zip(&a_vals))
            .map(|(&t, (&vt, &at))| match inv.increasing_form(t * shift) {
                Ok(vx) => (vx - vt) / at,
                Err(_) => f64::NAN,
            })
            .collect();
        pi_limits.push((x, estimate_sequence(&values, opts.grid, &opts.limit)));
    }
    let mut report = PiReport {
        route,
        a,
        b,
        pi_limits,
        passed: false,
    };
    report.passed = report
        .pi_limits
        .iter()
        .all(|(x, e)| e.is_finite_near(report.target(*x), opts.tol));
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct PiRepresentation {
    pub passed: bool,
    /// Fitted additive constant.
    pub c: f64,
    /// Limit of the normalized residual on the calibration grid.
    pub limit: LimitEstimate,
    /// `(t, residual)` on validation probes.
    pub validation: Vec<(f64, f64)>,
}

/// Checks `v(t) ≈ a(t) + ∫_{t0}^t a(z)/z dz + C` with `C` fitted at the median
/// validation probe. The residual `|v − a − ∫ − C|/(1 + |v|)` must tend to 0
/// on `grid` (within `tol`) and must not grow across the validation probes.
/// `a` is expected to be slowly varying.
pub fn pi_representation_check(
    v: &TailFunction,
    a: &TailFunction,
    t0: f64,
    grid: ProbeGrid,
    tol: f64,
) -> Result<PiRepresentation> {
    if !(t0 > 0.0) {
        return Err(Error::InvalidArgument(format!("origin must be positive, got {t0}")));
    }
    let grid = grid_above(grid, t0.max(v.t0()).max(a.t0()));
    let validation_t = grid.interleaved(8);
    let mut probes: Vec<(f64, bool)> = grid.points().into_iter().map(|t| (t, false)).collect();
    probes.extend(validation_t.iter().map(|&t| (t, true)));
    probes.sort_by(|x, y| x.0.total_cmp(&y.0));

    let cfg = QuadConfig::with_rel_tol(1e-12);
    let mut at = t0;
    let mut integral = 0.0;
    let mut gaps = Vec::with_capacity(probes.len());
    for &(t, is_validation) in &probes {
        integral += integrate(|u| a.eval(u.exp()), at.ln(), t.ln(), &cfg)?.value;
        at = t;
        let vt = v.eval(t)?;
        gaps.push((t, is_validation, vt - a.eval(t)? - integral, vt));
    }
    let val: Vec<_> = gaps.iter().filter(|g| g.1).collect();
    let c = val[val.len() / 2].2;
    let resid = |g: &(f64, bool, f64, f64)| (g.2 - c).abs() / (1.0 + g.3.abs());
    let calibration: Vec<f64> = gaps.iter().filter(|g| !g.1).map(resid).collect();
    let limit = estimate_sequence(&calibration, grid, &LimitOptions::default());
    let validation: Vec<(f64, f64)> = val.iter().map(|g| (g.0, resid(g))).collect();
    let (first, last) = (validation[0].1, validation[validation.len() - 1].1);
    let passed = limit.is_finite_near(0.0, tol) && (last <= first || last <= tol);
    Ok(PiRepresentation {
        passed,
        c,
        limit,
        validation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcmodel::catalog;

    fn exp_fn(t0: f64) -> TailFunction {
        TailFunction::from_log("e^t", t0, |t| t, Some(Arc::new(|_| 1.0)))
    }

    #[test]
    fn closed_form_inverses() {
        let sq = TailFunction::power_law(1.0, 2.0, 0.0);
        let inv = generalized_inverse(&sq, Side::Left).unwrap();
        assert!((inv.eval(9.0).unwrap() - 3.0).abs() < 1e-14);
        let isq = TailFunction::power_law(1.0, -2.0, 1.0);
        let inv = generalized_inverse(&isq, Side::Right).unwrap();
        assert!((inv.eval(0.25).unwrap() - 2.0).abs() < 1e-14);
        let inv = generalized_inverse(&exp_fn(0.0), Side::Left).unwrap();
        assert!((inv.eval(5f64.exp()).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn left_inverse_is_an_infimum() {
        // flat stretch: f = 1 on [1, 2], then t - 1
        let f = TailFunction::analytic("step", 0.0, |t: f64| t.min(1.0).max((t - 1.0).max(1e-300)), None::<fn(f64) -> f64>)
            .unwrap();
        let inv = generalized_inverse(&f, Side::Left).unwrap();
        let t = inv.eval(1.0).unwrap();
        assert!((t - 1.0).abs() < 1e-14, "{t}");
        let t = inv.eval(1.5).unwrap();
        assert!((t - 2.5).abs() < 1e-13);
        assert!(f.eval(t).unwrap() >= 1.5);
        assert!(f.eval(t * (1.0 - 1e-14)).unwrap() < 1.5);
    }

    #[test]
    fn wrong_direction_is_not_monotone() {
        let f = TailFunction::power_law(1.0, -2.0, 1.0);
        assert!(matches!(generalized_inverse(&f, Side::Left), Err(Error::NotMonotone { .. })));
    }

    #[test]
    fn unreachable_level_hits_the_cap() {
        // bounded increasing function
        let f = TailFunction::from_log("1 - 1/t", 2.0, |t: f64| (1.0 - 1.0 / t).ln(), None);
        let inv = generalized_inverse(&f, Side::Left).unwrap();
        assert!(matches!(inv.eval(2.0), Err(Error::BracketCap { .. })));
    }

    #[test]
    fn inverse_indices() {
        let o = LimitOptions::default();
        let g = ProbeGrid::default();
        let e = inverse_index_check(&TailFunction::power_law(1.0, 3.0, 1.0), 3.0, g, &o).unwrap();
        assert!(e.is_finite_near(1.0 / 3.0, 1e-8), "{e:?}");
        let e = inverse_index_check(&TailFunction::power_law(1.0, -2.0, 1.0), -2.0, g, &o).unwrap();
        assert!(e.is_finite_near(0.5, 1e-8), "{e:?}");
        let f = TailFunction::analytic("t^2 log t", 2.0, |t: f64| t * t * t.ln(), Some(|t: f64| 2.0 * t * t.ln() + t))
            .unwrap();
        let e = inverse_index_check(&f, 2.0, g, &o).unwrap();
        assert!(e.is_finite_near(0.5, 1e-2), "{e:?}");
    }

    #[test]
    fn exponential_inverse_is_exactly_pi() {
        let g = TailFunction::constant(1.0, 0.0);
        let r = pi_functional(&exp_fn(0.0), 1.0, Some(&g), &PiOptions::default()).unwrap();
        assert_eq!(r.route, PiRoute::Increasing);
        for (x, e) in &r.pi_limits {
            let v = e.value().unwrap();
            assert!((v - x.ln()).abs() < 1e-12, "{x}: {v}");
        }
        assert!(r.passed);
        // the integral form of a(t) reaches the same limit
        let r = pi_functional(&exp_fn(0.0), 1.0, None, &PiOptions::default()).unwrap();
        assert!(r.passed, "{:?}", r.pi_limits);
    }

    #[test]
    fn exp_sqrt_inverse() {
        let f = TailFunction::from_log("exp(sqrt t)", 0.0, |t: f64| t.sqrt(), Some(Arc::new(|t: f64| 0.5 / t.sqrt())));
        let g = TailFunction::power_law(2.0, 0.5, 0.0);
        let r = pi_functional(&f, 1.0, Some(&g), &PiOptions::default()).unwrap();
        assert!(r.passed, "{:?}", r.pi_limits);
        // a(t) = 2 log t
        let t: f64 = 1e100;
        assert!((r.a.eval(t).unwrap() / (2.0 * t.ln()) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn normal_decreasing_route() {
        let n = catalog::standard_normal().unwrap();
        let opts = PiOptions {
            tol: 5e-2,
            ..PiOptions::default()
        };
        let r = pi_functional(n.survival(), 8.0, None, &opts).unwrap();
        assert_eq!(r.route, PiRoute::Decreasing);
        assert!(r.passed, "{:?}", r.pi_limits);
    }

    #[test]
    fn representation_check_cases() {
        let g = ProbeGrid::spanning(8.0, 1e300, 48).unwrap();
        let log = TailFunction::from_log("log t", 1.5, |t: f64| t.ln().ln(), None);
        let one = TailFunction::constant(1.0, 1.0);
        let r = pi_representation_check(&log, &one, 1.0, g, 1e-2).unwrap();
        assert!(r.passed);
        assert!((r.c + 1.0).abs() < 1e-9, "{}", r.c);

        let log2 = TailFunction::from_log("(log t)^2", 1.5, |t: f64| 2.0 * t.ln().ln(), None);
        let two_log = TailFunction::from_log("2 log t", 1.5, |t: f64| (2.0 * t.ln()).ln(), None);
        assert!(pi_representation_check(&log2, &two_log, 1.5, g, 1e-2).unwrap().passed);

        let id = TailFunction::power_law(1.0, 1.0, 1.0);
        assert!(!pi_representation_check(&id, &one, 1.0, g, 1e-2).unwrap().passed);
    }
}
