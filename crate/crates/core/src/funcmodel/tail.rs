use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numlimit::ProbeGrid;
use crate::quad::{integrate, QuadConfig};

pub(crate) type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A positive function on `[t0, ∞)`, the universal input of the toolkit.
///
/// The function is held in log form: `ln f(t)` and, when known, the logarithmic
/// derivative `f'(t)/f(t)`. Rapidly varying tails such as `exp(-t²/2)` underflow
/// long before their asymptotics settle, while their logarithms stay finite over
/// the whole probe range. Ratios `f(s)/f(t)` are always formed from log values.
///
/// Without an analytic derivative a central finite difference of `ln f` with
/// relative step `max(t, 1)·ε^{1/3}` stands in, and
/// [`has_analytic_deriv`](Self::has_analytic_deriv) reports `false`.
#[derive(Clone)]
pub struct TailFunction {
    ln_eval: ScalarFn,
    dlog: Option<ScalarFn>,
    t0: f64,
    label: String,
}

impl fmt::Debug for TailFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TailFunction")
            .field("label", &self.label)
            .field("t0", &self.t0)
            .field("analytic_deriv", &self.dlog.is_some())
            .finish()
    }
}

/// Pointwise transforms that preserve the tail classes.
#[derive(Debug, Clone)]
pub enum Transform {
    /// `f(t)^β`
    Power(f64),
    /// `f(t)·g(t)`
    Product(TailFunction),
    /// `f(g(t))`, requires `g(t) → ∞`
    Compose(TailFunction),
    /// `1/f(t)`
    Reciprocal,
    /// `f(ln t)`
    ShiftLog,
    /// `c·f(t)`
    Scale(f64),
}

impl TailFunction {
    /// Builds a tail function from a plain evaluator and optional derivative.
    ///
    /// Fails if `eval(t0)` is non-finite or non-positive. Later evaluations that
    /// leave `(0, ∞)` are reported as domain errors naming `t`.
    pub fn analytic<E, D>(label: impl Into<String>, t0: f64, eval: E, deriv: Option<D>) -> Result<Self>
    where
        E: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let eval = Arc::new(eval);
        let ln_eval = {
            let eval = eval.clone();
            Arc::new(move |t: f64| {
                let v = eval(t);
                if v.is_finite() && v > 0.0 {
                    v.ln()
                } else if v == f64::INFINITY {
                    v
                } else if v.is_finite() {
                    f64::NEG_INFINITY
                } else {
                    f64::NAN
                }
            }) as ScalarFn
        };
        let dlog = deriv.map(|d| {
            let eval = eval.clone();
            Arc::new(move |t: f64| d(t) / eval(t)) as ScalarFn
        });
        let f = Self {
            ln_eval,
            dlog,
            t0,
            label: label.into(),
        };
        f.ln_eval(t0)?;
        Ok(f)
    }

    /// Builds a tail function from `ln f` and, optionally, `f'/f`.
    pub fn from_log<L>(label: impl Into<String>, t0: f64, ln_eval: L, log_deriv: Option<ScalarFn>) -> Self
    where
        L: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            ln_eval: Arc::new(ln_eval),
            dlog: log_deriv,
            t0,
            label: label.into(),
        }
    }

    /// `f ≡ c`.
    pub fn constant(c: f64, t0: f64) -> Self {
        let lc = c.ln();
        Self::from_log(format!("{c}"), t0, move |_| lc, Some(Arc::new(|_| 0.0)))
    }

    /// `f(t) = c·t^p` on `[t0, ∞)`, `t0 > 0`.
    pub fn power_law(c: f64, p: f64, t0: f64) -> Self {
        let lc = c.ln();
        let label = if c == 1.0 {
            format!("t^{p}")
        } else {
            format!("{c}*t^{p}")
        };
        Self::from_log(label, t0, move |t| lc + p * t.ln(), Some(Arc::new(move |t| p / t)))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn has_analytic_deriv(&self) -> bool {
        self.dlog.is_some()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Same function with a different lower end of validity.
    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    fn domain(&self, t: f64, reason: impl Into<String>) -> Error {
        Error::Domain {
            label: self.label.clone(),
            t,
            reason: reason.into(),
        }
    }

    /// `ln f(t)`.
    pub fn ln_eval(&self, t: f64) -> Result<f64> {
        if !(t >= self.t0) {
            return Err(self.domain(t, format!("below t0 = {}", self.t0)));
        }
        let v = (self.ln_eval)(t);
        if v.is_nan() || v == f64::INFINITY {
            Err(self.domain(t, "non-finite value"))
        } else if v == f64::NEG_INFINITY {
            Err(self.domain(t, "non-positive value"))
        } else {
            Ok(v)
        }
    }

    /// `ln f(t)` with overflow and underflow passed through as `±∞`; only NaN
    /// and arguments below `t0` are errors. Used where values are only
    /// compared, as in bisection.
    pub fn ln_eval_extended(&self, t: f64) -> Result<f64> {
        if !(t >= self.t0) {
            return Err(self.domain(t, format!("below t0 = {}", self.t0)));
        }
        let v = (self.ln_eval)(t);
        if v.is_nan() {
            Err(self.domain(t, "non-finite value"))
        } else {
            Ok(v)
        }
    }

    /// `f(t)`; may underflow to zero for rapidly decaying tails where
    /// [`ln_eval`](Self::ln_eval) is still finite.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.ln_eval(t).map(f64::exp)
    }

    /// Finite-difference step used at `t`.
    pub fn fd_step(t: f64) -> f64 {
        t.abs().max(1.0) * f64::EPSILON.cbrt()
    }

    /// Finite-difference `f'/f` at `t` with step `h`; one-sided near `t0`.
    pub fn fd_log_deriv(&self, t: f64, h: f64) -> Result<f64> {
        if t - h >= self.t0 {
            Ok((self.ln_eval(t + h)? - self.ln_eval(t - h)?) / (2.0 * h))
        } else {
            let f0 = self.ln_eval(t)?;
            let f1 = self.ln_eval(t + h)?;
            let f2 = self.ln_eval(t + 2.0 * h)?;
            Ok((-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h))
        }
    }

    /// `f'(t)/f(t)`: analytic when available, else finite difference.
    pub fn log_deriv(&self, t: f64) -> Result<f64> {
        match &self.dlog {
            Some(d) => {
                if !(t >= self.t0) {
                    return Err(self.domain(t, format!("below t0 = {}", self.t0)));
                }
                let v = d(t);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(self.domain(t, "non-finite derivative"))
                }
            }
            None => self.fd_log_deriv(t, Self::fd_step(t)),
        }
    }

    /// `f'(t)`.
    pub fn deriv(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)? * self.log_deriv(t)?)
    }

    /// Relative disagreement between finite differences at steps `h` and `h/2`;
    /// zero when the derivative is analytic.
    pub fn fd_instability(&self, t: f64) -> Result<f64> {
        if self.dlog.is_some() {
            return Ok(0.0);
        }
        let h = Self::fd_step(t);
        let a = self.fd_log_deriv(t, h)?;
        let b = self.fd_log_deriv(t, 0.5 * h)?;
        Ok((a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
    }

    /// `ln f(t + dx) - ln f(t)`.
    ///
    /// The direct difference of logarithms is used unless its round-off,
    /// relative to the increment, would exceed `1e-12`; that happens when
    /// `|ln f(t)|` dwarfs the increment, or when `t + dx` rounds to `t`. Then,
    /// for short steps with an analytic log-derivative, `f'/f` is integrated
    /// over the step instead.
    pub fn log_increment(&self, t: f64, dx: f64) -> Result<f64> {
        if dx == 0.0 {
            return Ok(0.0);
        }
        let a = self.ln_eval(t)?;
        let resolved = t + dx != t;
        let b = if resolved { self.ln_eval(t + dx)? } else { a };
        let direct = b - a;
        let roundoff = 4.0 * f64::EPSILON * a.abs().max(b.abs());
        if resolved && roundoff <= 1e-12 * direct.abs().max(1.0) {
            return Ok(direct);
        }
        match &self.dlog {
            Some(_) if dx.abs() <= 0.5 * t.abs().max(1.0) => {
                let cfg = QuadConfig::with_rel_tol(1e-12);
                let r = integrate(|u| Ok(self.log_deriv(t + u * dx)? * dx), 0.0, 1.0, &cfg)?;
                Ok(r.value)
            }
            _ => Ok(direct),
        }
    }

    /// `ln f(tx) - ln f(t)`.
    pub fn log_ratio(&self, t: f64, x: f64) -> Result<f64> {
        self.log_increment(t, t * x - t)
    }

    /// Applies `kind` pointwise; the derivative is carried through by the
    /// chain and product rules when available.
    pub fn transform(&self, kind: Transform) -> Result<TailFunction> {
        let f = self.clone();
        match kind {
            Transform::Power(beta) => {
                let dlog = f.dlog.clone().map(|d| Arc::new(move |t| beta * d(t)) as ScalarFn);
                let ff = f.clone();
                Ok(Self::from_log(
                    format!("({})^{beta}", f.label),
                    f.t0,
                    move |t| beta * (ff.ln_eval)(t),
                    dlog,
                ))
            }
            Transform::Scale(c) => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidArgument(format!("scale must be positive, got {c}")));
                }
                let lc = c.ln();
                let ff = f.clone();
                Ok(Self::from_log(
                    format!("{c}*{}", f.label),
                    f.t0,
                    move |t| lc + (ff.ln_eval)(t),
                    f.dlog.clone(),
                ))
            }
            Transform::Reciprocal => {
                let t0 = f.t0;
                let mut probes = vec![t0];
                probes.extend(ProbeGrid::default().points().into_iter().filter(|&t| t > t0));
                for t in probes {
                    if (f.ln_eval)(t) == f64::NEG_INFINITY {
                        return Err(f.domain(t, "zero value has no reciprocal"));
                    }
                }
                let dlog = f.dlog.clone().map(|d| Arc::new(move |t| -d(t)) as ScalarFn);
                let ff = f.clone();
                Ok(Self::from_log(
                    format!("1/({})", f.label),
                    f.t0,
                    move |t| -(ff.ln_eval)(t),
                    dlog,
                ))
            }
            Transform::Product(g) => {
                let dlog = match (&f.dlog, &g.dlog) {
                    (Some(a), Some(b)) => {
                        let (a, b) = (a.clone(), b.clone());
                        Some(Arc::new(move |t| a(t) + b(t)) as ScalarFn)
                    }
                    _ => None,
                };
                let (ff, gg) = (f.clone(), g.clone());
                Ok(Self::from_log(
                    format!("({})*({})", f.label, g.label),
                    f.t0.max(g.t0),
                    move |t| (ff.ln_eval)(t) + (gg.ln_eval)(t),
                    dlog,
                ))
            }
            Transform::Compose(g) => {
                check_unbounded(&g)?;
                let t0 = first_reaching(&g, f.t0)?;
                let dlog = match (&f.dlog, &g.dlog) {
                    (Some(a), Some(b)) => {
                        let (a, b) = (a.clone(), b.clone());
                        let gl = g.ln_eval.clone();
                        Some(Arc::new(move |t| {
                            let gt = gl(t).exp();
                            a(gt) * gt * b(t)
                        }) as ScalarFn)
                    }
                    _ => None,
                };
                let (ff, gg) = (f.clone(), g.clone());
                Ok(Self::from_log(
                    format!("({})∘({})", f.label, g.label),
                    t0,
                    move |t| (ff.ln_eval)((gg.ln_eval)(t).exp()),
                    dlog,
                ))
            }
            Transform::ShiftLog => {
                let t0 = f.t0.exp();
                let dlog = f.dlog.clone().map(|d| Arc::new(move |t: f64| d(t.ln()) / t) as ScalarFn);
                let ff = f.clone();
                Ok(Self::from_log(
                    format!("({})(log t)", f.label),
                    t0,
                    move |t| (ff.ln_eval)(t.ln()),
                    dlog,
                ))
            }
        }
    }
}

/// `g(t) → ∞` on the default probe grid: increasing over the tail and far above
/// its starting value.
fn check_unbounded(g: &TailFunction) -> Result<()> {
    let grid = ProbeGrid::default();
    let vals: Vec<f64> = grid
        .points()
        .into_iter()
        .filter(|&t| t >= g.t0)
        .map(|t| g.ln_eval(t))
        .collect::<Result<_>>()?;
    let n = vals.len();
    let tail_ok = n >= 8 && vals[n - 8..].windows(2).all(|w| w[1] > w[0]);
    if tail_ok && vals[n - 1] > vals[0] + 1.0 && vals[n - 1] > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "inner function {} does not tend to infinity on the probe grid",
            g.label
        )))
    }
}

/// Smallest `t >= g.t0` with `g(t) >= level` (for increasing `g`).
fn first_reaching(g: &TailFunction, level: f64) -> Result<f64> {
    let target = level.max(f64::MIN_POSITIVE).ln();
    let mut lo = g.t0;
    if g.ln_eval(lo)? >= target {
        return Ok(lo);
    }
    let mut hi = lo.abs().max(1.0) * 2.0;
    while g.ln_eval(hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::BracketCap {
                label: g.label.clone(),
                level,
                cap: 1e300,
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g.ln_eval(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
