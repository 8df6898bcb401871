//! Hazard rates, cumulative hazard, its inverse and tail integrals.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::funcmodel::{Distribution, TailFunction, Transform};
use crate::numlimit::{estimate_sequence, LimitOptions, ProbeGrid};
use crate::quad::{geometric_partial_sums, integrate_semi_infinite, integrate_span, QuadConfig};

/// Upper end for bracket expansion.
pub const BRACKET_CAP: f64 = 1e300;

pub const H_TOL: f64 = 1e-10;
const TAIL_TOL: f64 = 1e-10;
const EXTRAPOLATION_TOL: f64 = 1e-5;

/// `h = density / survival`, in log form.
pub fn hazard_rate(d: &Distribution) -> Result<TailFunction> {
    if let Some(h) = d.explicit_hazard() {
        return Ok(h.clone());
    }
    let dens = d.density().ok_or(Error::Missing("density"))?.clone();
    let surv = d.survival().clone();
    let t0 = dens.t0().max(surv.t0());
    for t in std::iter::once(t0).chain(ProbeGrid::default().points().into_iter().filter(|&t| t > t0)) {
        if dens.ln_eval(t).is_ok() {
            surv.ln_eval(t)?;
        }
    }
    let dlog = if dens.has_analytic_deriv() && surv.has_analytic_deriv() {
        let (a, b) = (dens.clone(), surv.clone());
        Some(Arc::new(move |t| a.log_deriv(t).unwrap_or(f64::NAN) - b.log_deriv(t).unwrap_or(f64::NAN))
            as Arc<dyn Fn(f64) -> f64 + Send + Sync>)
    } else {
        None
    };
    let (a, b) = (dens.clone(), surv.clone());
    Ok(TailFunction::from_log(
        format!("hazard of {}", d.label()),
        t0,
        move |t| match (a.ln_eval(t), b.ln_eval(t)) {
            (Ok(x), Ok(y)) => x - y,
            _ => f64::NAN,
        },
        dlog,
    ))
}

/// `∫_t^∞ f(x) dx / f(t)`.
///
/// For `t > 0` the substitution `x = t·e^w` turns a power tail into an
/// exponential one, so doubling panels in `w` resolve heavy and light tails
/// alike; `w` is capped where `x` would overflow. For `t ≤ 0` the panels are
/// additive in `x - t`. A sum that has not stabilized by the cap is reported as
/// [`Error::TailDivergent`].
pub fn tail_integral_ratio(f: &TailFunction, t: f64) -> Result<f64> {
    let cfg = QuadConfig::with_rel_tol(TAIL_TOL);
    let scale_from = |d: f64| if d.is_finite() && d != 0.0 { 1.0 / d.abs() } else { 1.0 };
    let dl = f.log_deriv(t)?;
    let (scale, y_max) = if t > 0.0 {
        (scale_from(t * dl).min(1.0), (f64::MAX / 4.0 / t).ln())
    } else {
        (scale_from(dl).min(1.0), 1e300)
    };
    let integrand = |y: f64| -> Result<f64> {
        if t > 0.0 {
            let inc = f.log_increment(t, t * y.exp_m1())?;
            Ok((inc + y).exp() * t)
        } else {
            Ok(f.log_increment(t, y)?.exp())
        }
    };
    let divergent = |e: Error| match e {
        Error::Quadrature { .. } => Error::TailDivergent { t },
        e => e,
    };
    if let Some(i) = integrate_semi_infinite(&integrand, scale, y_max, &cfg).map_err(divergent)? {
        return Ok(i.value);
    }
    // Not settled before the cap: tails decaying like a power of log x. The
    // partial sums at geometric edges then approach the limit geometrically,
    // which Aitken extrapolation resolves. Divergent sums have increments that
    // do not shrink geometrically and are rejected.
    let start = scale / 64.0;
    let ratio = 2f64.powf(0.25);
    let mut sums = geometric_partial_sums(&integrand, start, ratio, y_max, &cfg).map_err(divergent)?;
    sums.pop(); // the clipped last panel breaks the geometric pattern
    let incs: Vec<f64> = sums.windows(2).map(|w| w[1] - w[0]).collect();
    let shrinking = incs.len() >= 4
        && incs[incs.len() - 4..]
            .windows(2)
            .all(|w| w[1] > 0.0 && w[1] <= 0.95 * w[0]);
    let grid = ProbeGrid::new(start, ratio, sums.len()).map_err(|_| Error::TailDivergent { t })?;
    let est = estimate_sequence(&sums, grid, &LimitOptions::with_tol(EXTRAPOLATION_TOL));
    let v = est.accel_tail[est.accel_tail.len() - 1];
    let settled = est.accel_tail[1..]
        .iter()
        .all(|a| (a - v).abs() <= EXTRAPOLATION_TOL * v.abs());
    let last = sums[sums.len() - 1];
    if shrinking && settled && v >= last {
        Ok(v)
    } else {
        Err(Error::TailDivergent { t })
    }
}

/// Reciprocal hazard `R(t) = ∫_t^∞ F̄ / F̄(t)` (the mean excess over `t`).
pub fn reciprocal_hazard_r(d: &Distribution, t: f64) -> Result<f64> {
    tail_integral_ratio(d.survival(), t)
}

/// `H(t) = ∫_{t0}^t dz / g(z)`.
pub fn cumulative_hazard(g: &TailFunction, t0: f64, t: f64) -> Result<f64> {
    if t < t0 {
        return Err(Error::InvalidArgument(format!("t = {t} lies below t0 = {t0}")));
    }
    hazard_increment(g, t0, t, 0.0)
}

/// `∫_a^b 1/g`, accurate to `H_TOL` relative to itself or to `base`,
/// whichever is larger.
pub(crate) fn hazard_increment(g: &TailFunction, a: f64, b: f64, base: f64) -> Result<f64> {
    if b == a {
        return Ok(0.0);
    }
    let mut cfg = QuadConfig::with_rel_tol(H_TOL);
    cfg.abs_floor = cfg.abs_floor.max(H_TOL * base.abs());
    let inv = |z: f64| {
        let v = (-g.ln_eval(z)?).exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain {
                label: g.label().to_string(),
                t: z,
                reason: "1/g is not finite".into(),
            })
        }
    };
    Ok(integrate_span(inv, a, b, &cfg)?.value)
}

/// Hazard rate, reciprocal hazard, and cumulative hazard from a common origin.
#[derive(Debug, Clone)]
pub struct HazardView {
    h: TailFunction,
    g: TailFunction,
    t0: f64,
}

impl HazardView {
    /// View built from a reciprocal hazard `g` with `H(t0) = 0`.
    pub fn from_g(g: TailFunction, t0: f64) -> Result<Self> {
        let h = g.transform(Transform::Reciprocal)?;
        Ok(Self {
            h,
            g,
            t0: t0.max(f64::MIN),
        })
    }

    /// View of a distribution's hazard, with `H` anchored at the survival's `t0`.
    pub fn from_distribution(d: &Distribution) -> Result<Self> {
        let h = hazard_rate(d)?;
        let g = h.transform(Transform::Reciprocal)?;
        let t0 = h.t0();
        Ok(Self { h, g, t0 })
    }

    pub fn h(&self) -> &TailFunction {
        &self.h
    }

    pub fn g(&self) -> &TailFunction {
        &self.g
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// `H(t)`.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        cumulative_hazard(&self.g, self.t0, t)
    }

    /// `H^{-1}(y)`: doubling bracket from `max(2·t0, 1)`, then bisection on
    /// incremental integrals.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::InvalidArgument(format!("H^-1 needs y >= 0, got {y}")));
        }
        if y == 0.0 {
            return Ok(self.t0);
        }
        let mut lo = self.t0;
        let mut h_lo = 0.0;
        let mut hi = (2.0 * self.t0).max(1.0);
        let mut h_hi = hazard_increment(&self.g, lo, hi, 0.0)?;
        while h_hi < y {
            if hi >= BRACKET_CAP {
                return Err(Error::HazardSaturates {
                    target: y,
                    cap: BRACKET_CAP,
                });
            }
            let next = (hi * 2.0).min(BRACKET_CAP);
            let inc = hazard_increment(&self.g, hi, next, h_hi)?;
            lo = hi;
            h_lo = h_hi;
            hi = next;
            h_hi = h_lo + inc;
        }
        for _ in 0..200 {
            if hi - lo <= 1e-13 * hi.abs().max(1e-300) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let h_mid = h_lo + hazard_increment(&self.g, lo, mid, h_lo)?;
            if h_mid < y {
                lo = mid;
                h_lo = h_mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `Ψ(y) = g(H^{-1}(y))`.
    pub fn psi(&self, y: f64) -> Result<f64> {
        self.g.eval(self.inverse(y)?)
    }

    /// `Ψ` as a tail function on `[0, ∞)`.
    pub fn psi_function(&self) -> TailFunction {
        let view = self.clone();
        TailFunction::from_log(
            format!("total hazard of {}", self.g.label()),
            0.0,
            move |y| match view.inverse(y) {
                Ok(t) => view.g.ln_eval(t).unwrap_or(f64::NAN),
                Err(_) => f64::NAN,
            },
            None,
        )
    }
}

/// `H^{-1}(y)` for `view`.
pub fn inverse_cumulative_hazard(view: &HazardView, y: f64) -> Result<f64> {
    view.inverse(y)
}

/// `Ψ(y) = g(H^{-1}(y))`.
pub fn total_hazard_psi(view: &HazardView, y: f64) -> Result<f64> {
    view.psi(y)
}

/// Integral of `f` over `[a, b]` relative to `f(b)`: `∫_a^b f(z)/f(b) dz`.
pub(crate) fn head_integral_ratio(f: &TailFunction, a: f64, b: f64) -> Result<f64> {
    let lb = f.ln_eval(b)?;
    let cfg = QuadConfig::with_rel_tol(1e-10);
    let r = integrate_span(|z| Ok((f.ln_eval(z)? - lb).exp()), a, b, &cfg)?;
    Ok(r.value)
}
