//! Karamata and Γ representations, monotone envelopes and smooth equivalents.

use std::io;
use std::sync::Arc;

use crate::classify::grid_above;
use crate::error::{Error, Result};
use crate::funcmodel::{TailFunction, Transform};
use crate::hazard::{hazard_increment, H_TOL};
use crate::numlimit::{estimate_sequence, LimitEstimate, LimitOptions, ProbeGrid};
use crate::quad::{integrate, integrate_span, QuadConfig};

/// Largest tolerated relative disagreement between finite differences at two
/// step sizes before a numerical derivative is rejected.
const FD_TOL: f64 = 1e-4;
/// `ln A` samples whose accumulated error exceeds this are reported as NaN.
const LN_A_ERR_CAP: f64 = 1e-3;
/// Relative half-width of the centered difference for `A'/A`.
const A_STEP: f64 = 1e-4;
/// Tolerance of the loose index check in [`karamata_decompose`].
const INDEX_SLACK: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepresentationKind {
    /// `f(t) = c(t)·t^ρ·exp{∫ ε(z)/z dz}`
    KaramataRV,
    /// `f(t) = A(t)·exp{α·H(t)}`
    GammaOmey,
}

/// One row of a representation table.
///
/// Karamata rows carry `(ε(t), c(t))`; Γ rows carry `(A(t), g(t)·A'(t)/A(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentSample {
    pub t: f64,
    pub component: f64,
    pub companion: f64,
    /// `|f̂(t)/f(t) − 1|` for the reconstruction `f̂`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct RepresentOptions {
    pub grid: ProbeGrid,
    pub limit: LimitOptions,
    pub validation_probes: usize,
}

impl Default for RepresentOptions {
    fn default() -> Self {
        Self {
            grid: ProbeGrid::default(),
            limit: LimitOptions::default(),
            validation_probes: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RepresentationReport {
    pub kind: RepresentationKind,
    /// `ρ` or `α`.
    pub index: f64,
    pub t0: f64,
    /// Rows on the calibration grid.
    pub samples: Vec<ComponentSample>,
    /// Rows at probes interleaved between calibration points.
    pub validation: Vec<ComponentSample>,
    /// Largest reconstruction error over the validation rows (NaN if none could
    /// be formed).
    pub residual: f64,
    /// Largest reconstruction error over the calibration rows.
    pub calibration_residual: f64,
    /// Limit of `ε` (Karamata) or of `g·A'/A` (Γ); both should be 0.
    pub trend: LimitEstimate,
    /// Limit of `c(t)` (Karamata only).
    pub c_limit: Option<LimitEstimate>,
    pub auxiliary: Option<TailFunction>,
    /// Panels where `∫ ε/z` could not be resolved by quadrature and the exact
    /// log difference was used instead.
    pub fallback_panels: usize,
}

impl RepresentationReport {
    /// Samples of the quantity that must vanish: `ε` or `g·A'/A`.
    pub fn trend_samples(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| match self.kind {
                RepresentationKind::KaramataRV => s.component,
                RepresentationKind::GammaOmey => s.companion,
            })
            .collect()
    }

    /// Final trend sample is at most half the first in magnitude (or both are
    /// at round-off level).
    pub fn trend_halves(&self) -> bool {
        let v = self.trend_samples();
        match (v.first(), v.last()) {
            (Some(a), Some(b)) => b.abs() <= 0.5 * a.abs() || b.abs() <= 1e-12,
            _ => false,
        }
    }

    pub fn final_trend(&self) -> f64 {
        self.trend_samples().last().copied().unwrap_or(f64::NAN)
    }

    /// All rows, sorted by `t`, as CSV with header `t,epsilon_or_A,c_or_B,residual`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut rows: Vec<&ComponentSample> = self.samples.iter().chain(&self.validation).collect();
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["t", "epsilon_or_A", "c_or_B", "residual"])?;
        for r in rows {
            out.write_record([
                r.t.to_string(),
                r.component.to_string(),
                r.companion.to_string(),
                r.residual.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn epsilon(f: &TailFunction, rho: f64, t: f64) -> Result<f64> {
    Ok(t * f.log_deriv(t)? - rho)
}

/// `∫_a^b ε(z)/z dz` with `z = e^u`. Panels the quadrature cannot resolve
/// (fast oscillation in `ε`) use the exact log difference; the flag says so.
fn eps_increment(f: &TailFunction, rho: f64, a: f64, b: f64) -> Result<(f64, bool)> {
    let cfg = QuadConfig {
        rel_tol: 1e-10,
        abs_floor: if f.has_analytic_deriv() { 1e-12 } else { 1e-8 },
        max_intervals: 200,
    };
    match integrate(|u| epsilon(f, rho, u.exp()), a.ln(), b.ln(), &cfg) {
        Ok(i) => Ok((i.value, false)),
        Err(Error::Quadrature { .. }) => Ok((f.log_increment(a, b - a)? - rho * (b / a).ln(), true)),
        Err(e) => Err(e),
    }
}

fn check_derivative(f: &TailFunction, t: f64) -> Result<()> {
    if f.fd_instability(t)? > FD_TOL {
        return Err(Error::UnstableDerivative {
            label: f.label().to_string(),
            t,
        });
    }
    Ok(())
}

fn representation_grid(grid: ProbeGrid, t0: f64) -> ProbeGrid {
    grid_above(grid, t0)
}

/// Running `∫_{t0}^t ε(z)/z dz` over sorted probes.
struct EpsAccumulator<'a> {
    f: &'a TailFunction,
    rho: f64,
    at: f64,
    value: f64,
    fallbacks: usize,
}

impl EpsAccumulator<'_> {
    fn advance(&mut self, t: f64) -> Result<f64> {
        if t > self.at {
            let (inc, fell_back) = eps_increment(self.f, self.rho, self.at, t)?;
            self.value += inc;
            self.fallbacks += fell_back as usize;
            self.at = t;
        }
        Ok(self.value)
    }
}

/// Karamata decomposition of `f ∈ RV_ρ` from origin `t0`.
///
/// `ε(t) = t·f'(t)/f(t) − ρ` and `c(t) = f(t)·t^{−ρ}·exp{−∫_{t0}^t ε(z)/z dz}`.
/// The reconstruction uses the limit of `c(t)` (its last value if the limit is
/// undetermined), so its residual measures how constant `c` really is.
pub fn karamata_decompose(
    f: &TailFunction,
    rho: f64,
    t0: f64,
    opts: &RepresentOptions,
) -> Result<RepresentationReport> {
    if !(t0 > 0.0) || t0 < f.t0() {
        return Err(Error::InvalidArgument(format!(
            "Karamata origin must be positive and at least t0 = {}, got {t0}",
            f.t0()
        )));
    }
    let grid = representation_grid(opts.grid, t0);
    let pts = grid.points();
    let mid = pts[pts.len() / 2];
    let last = grid.last();
    let mean_index = (f.ln_eval(last)? - f.ln_eval(mid)?) / (last / mid).ln();
    if (mean_index - rho).abs() > INDEX_SLACK {
        return Err(Error::InvalidArgument(format!(
            "{} does not look regularly varying with index {rho} (mean index {mean_index:.4} over [{mid:e}, {last:e}])",
            f.label()
        )));
    }

    let mut acc = EpsAccumulator {
        f,
        rho,
        at: t0,
        value: 0.0,
        fallbacks: 0,
    };
    let mut rows = Vec::with_capacity(pts.len());
    let mut ln_c = Vec::with_capacity(pts.len());
    let mut integrals = Vec::with_capacity(pts.len());
    for &t in &pts {
        if !f.has_analytic_deriv() {
            check_derivative(f, t)?;
        }
        let i = acc.advance(t)?;
        let lc = f.ln_eval(t)? - rho * t.ln() - i;
        ln_c.push(lc);
        integrals.push(i);
        rows.push(ComponentSample {
            t,
            component: epsilon(f, rho, t)?,
            companion: lc.exp(),
            residual: 0.0,
        });
    }
    let c_values: Vec<f64> = rows.iter().map(|r| r.companion).collect();
    let c_limit = estimate_sequence(&c_values, grid, &opts.limit);
    let c_final = c_limit.value().unwrap_or(c_values[c_values.len() - 1]);
    let ln_c_final = c_final.ln();
    let mut calibration_residual: f64 = 0.0;
    for (row, lc) in rows.iter_mut().zip(&ln_c) {
        row.residual = (ln_c_final - lc).exp_m1().abs();
        calibration_residual = calibration_residual.max(row.residual);
    }

    let mut validation = Vec::new();
    let mut residual: f64 = 0.0;
    for v in grid.interleaved(opts.validation_probes) {
        let k = pts.partition_point(|&t| t <= v);
        let (from, base) = if k == 0 { (t0, 0.0) } else { (pts[k - 1], integrals[k - 1]) };
        let (inc, fell_back) = eps_increment(f, rho, from, v)?;
        acc.fallbacks += fell_back as usize;
        let i = base + inc;
        let lc = f.ln_eval(v)? - rho * v.ln() - i;
        let r = (ln_c_final - lc).exp_m1().abs();
        residual = residual.max(r);
        validation.push(ComponentSample {
            t: v,
            component: epsilon(f, rho, v)?,
            companion: lc.exp(),
            residual: r,
        });
    }

    let eps: Vec<f64> = rows.iter().map(|r| r.component).collect();
    Ok(RepresentationReport {
        kind: RepresentationKind::KaramataRV,
        index: rho,
        t0,
        trend: estimate_sequence(&eps, grid, &opts.limit),
        samples: rows,
        validation,
        residual: if opts.validation_probes == 0 { f64::NAN } else { residual },
        calibration_residual,
        c_limit: Some(c_limit),
        auxiliary: None,
        fallback_panels: acc.fallbacks,
    })
}

/// The normalized slowly varying part `ℓ₁(t) = c·exp{∫_{t0}^t ε(z)/z dz}` with
/// `c` the limit of Karamata's `c(t)`.
pub fn normalized_sv(f: &TailFunction, rho: f64, t0: f64, opts: &RepresentOptions) -> Result<TailFunction> {
    let report = karamata_decompose(f, rho, t0, opts)?;
    let c_limit = report.c_limit.expect("Karamata reports carry a c limit");
    let Some(c) = c_limit.value() else {
        return Err(Error::NoLimit {
            what: format!("Karamata c(t) of {}", f.label()),
            detail: format!("last values {:?}", c_limit.raw_tail),
        });
    };
    let ln_c = c.ln();
    let (fe, fd) = (f.clone(), f.clone());
    let ln_eval = move |t: f64| -> f64 {
        if t == t0 {
            return ln_c;
        }
        // decade panels keep each quadrature short
        let mut at = t0;
        let mut total = ln_c;
        while at < t {
            let next = (at * 10.0).min(t);
            match eps_increment(&fe, rho, at, next) {
                Ok((v, _)) => total += v,
                Err(_) => return f64::NAN,
            }
            at = next;
        }
        total
    };
    let dlog = Arc::new(move |t: f64| epsilon(&fd, rho, t).map(|e| e / t).unwrap_or(f64::NAN));
    Ok(TailFunction::from_log(
        format!("normalized slowly varying part of {}", f.label()),
        t0,
        ln_eval,
        Some(dlog),
    ))
}

/// `ln A(b) − ln A(a)` for `A = f·exp{−α·H}`, with an error bound.
///
/// With an analytic `f'/f` the combined integrand `f'/f − α/g` is integrated
/// directly, which avoids subtracting two large increments.
fn ln_a_increment(f: &TailFunction, alpha: f64, g: &TailFunction, a: f64, b: f64) -> Result<(f64, f64)> {
    if b == a {
        return Ok((0.0, 0.0));
    }
    if f.has_analytic_deriv() {
        let scale = [a, b]
            .iter()
            .map(|&z| {
                let d = f.log_deriv(z).unwrap_or(0.0).abs();
                let h = (-g.ln_eval(z).unwrap_or(0.0)).exp() * alpha.abs();
                d.max(h)
            })
            .fold(0.0, f64::max);
        let round = 4.0 * f64::EPSILON * (b - a) * scale;
        let cfg = QuadConfig {
            rel_tol: 1e-10,
            abs_floor: round.max(1e-13),
            max_intervals: 2000,
        };
        let integrand = |z: f64| Ok(f.log_deriv(z)? - alpha * (-g.ln_eval(z)?).exp());
        if let Ok(i) = integrate_span(integrand, a, b, &cfg) {
            return Ok((i.value, i.error + round));
        }
    }
    let df = f.log_increment(a, b - a)?;
    let dh = alpha * hazard_increment(g, a, b, 0.0)?;
    let round = 4.0 * f64::EPSILON * (f.ln_eval(a)?.abs() + f.ln_eval(b)?.abs());
    Ok((df - dh, 1e-12 * df.abs() + H_TOL * dh.abs() + round))
}

/// `g(t)·A'(t)/A(t)` by a centered difference of `ln A` with half-width
/// `1e-4·t`, formed from increments rather than from two values of `ln A`.
fn a_trend(f: &TailFunction, alpha: f64, g: &TailFunction, t: f64) -> Result<f64> {
    let h = A_STEP * t.abs().max(1.0);
    let lo = (t - h).max(f.t0().max(g.t0()));
    let hi = t + h;
    let df = f.log_increment(lo, hi - lo)?;
    let dh = alpha * hazard_increment(g, lo, hi, 0.0)?;
    Ok(g.eval(t)? * (df - dh) / (hi - lo))
}

/// Γ representation `f(t) = A(t)·exp{α·H(t)}` with `H(t) = ∫_{t0}^t dz/g(z)`.
///
/// `ln A` is accumulated along the grid with an error bound; once cancellation
/// between `ln f` and `α·H` has cost more than `1e-3` the `A` samples are NaN.
/// The trend `g·A'/A` is formed locally and stays accurate throughout.
pub fn gamma_decompose(
    f: &TailFunction,
    alpha: f64,
    g: &TailFunction,
    t0: f64,
    opts: &RepresentOptions,
) -> Result<RepresentationReport> {
    if t0 < f.t0() || t0 < g.t0() {
        return Err(Error::InvalidArgument(format!(
            "Γ origin {t0} lies below the domain of f (t0 = {}) or g (t0 = {})",
            f.t0(),
            g.t0()
        )));
    }
    let grid = representation_grid(opts.grid, t0);
    let pts = grid.points();
    let mut ln_a = f.ln_eval(t0)?;
    let mut err = 4.0 * f64::EPSILON * ln_a.abs();
    let mut at = t0;
    let mut rows = Vec::with_capacity(pts.len());
    let mut ln_as = Vec::with_capacity(pts.len());
    for &t in &pts {
        let (inc, e) = ln_a_increment(f, alpha, g, at, t)?;
        ln_a += inc;
        err += e;
        at = t;
        let known = err <= LN_A_ERR_CAP;
        ln_as.push((ln_a, err, known));
        rows.push(ComponentSample {
            t,
            component: if known { ln_a.exp() } else { f64::NAN },
            companion: a_trend(f, alpha, g, t)?,
            residual: 0.0,
        });
    }

    let mut validation = Vec::new();
    let mut residual = f64::NAN;
    for v in grid.interleaved(opts.validation_probes) {
        let k = pts.partition_point(|&t| t <= v);
        if k == 0 || k >= pts.len() {
            continue;
        }
        let (la0, e0, known0) = ln_as[k - 1];
        let (la1, _, known1) = ln_as[k];
        let (inc, e) = ln_a_increment(f, alpha, g, pts[k - 1], v)?;
        let la_v = la0 + inc;
        let known = known0 && known1 && e0 + e <= LN_A_ERR_CAP;
        let r = if known {
            let w = (v / pts[k - 1]).ln() / (pts[k] / pts[k - 1]).ln();
            let interp = la0 + w * (la1 - la0);
            let r = (interp - la_v).exp_m1().abs();
            residual = if residual.is_nan() { r } else { residual.max(r) };
            r
        } else {
            f64::NAN
        };
        validation.push(ComponentSample {
            t: v,
            component: if known { la_v.exp() } else { f64::NAN },
            companion: a_trend(f, alpha, g, v)?,
            residual: r,
        });
    }

    let trend: Vec<f64> = rows.iter().map(|r| r.companion).collect();
    Ok(RepresentationReport {
        kind: RepresentationKind::GammaOmey,
        index: alpha,
        t0,
        trend: estimate_sequence(&trend, grid, &opts.limit),
        samples: rows,
        validation,
        residual,
        calibration_residual: 0.0,
        c_limit: None,
        auxiliary: Some(g.clone()),
        fallback_panels: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Envelope {
    /// `sup{f(x): t0 ≤ x ≤ t}`
    Sup,
    /// `inf{f(x): t0 ≤ x ≤ t}`
    Inf,
}

const ENVELOPE_START: usize = 256;
const ENVELOPE_MAX: usize = 1 << 22;
const ENVELOPE_TOL: f64 = 1e-6;
const ENVELOPE_PEAKS: usize = 8;

/// Running sup or inf of `f` over `[t0, t]`.
///
/// The sub-grid `x_k = t0 − 1 + (t − t0 + 1)^{k/n}` is geometric in distance
/// from `t0 − 1`; `n` doubles until two successive doublings change the extreme
/// by less than `1e-6` relative. The highest grid peaks are then polished by
/// golden-section search.
pub fn monotone_envelope(f: &TailFunction, direction: Envelope, t: f64) -> Result<f64> {
    let t0 = f.t0();
    if t <= t0 {
        return f.eval(t0.max(t));
    }
    let sign = match direction {
        Envelope::Sup => 1.0,
        Envelope::Inf => -1.0,
    };
    let span = t - t0 + 1.0;
    let x_at = |k: usize, n: usize| -> f64 {
        if k == n {
            t
        } else {
            t0 - 1.0 + span.powf(k as f64 / n as f64)
        }
    };
    let score = |x: f64| -> Result<f64> { Ok(sign * f.ln_eval(x.max(t0))?) };

    let mut n = ENVELOPE_START;
    let mut vals = (0..=n).map(|k| score(x_at(k, n))).collect::<Result<Vec<f64>>>()?;
    let mut best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut quiet = 0;
    while n < ENVELOPE_MAX && quiet < 2 {
        let before = best;
        let mut finer = Vec::with_capacity(2 * n + 1);
        for k in 0..n {
            finer.push(vals[k]);
            let s = score(x_at(2 * k + 1, 2 * n))?;
            best = best.max(s);
            finer.push(s);
        }
        finer.push(vals[n]);
        vals = finer;
        n *= 2;
        quiet = if best - before <= ENVELOPE_TOL { quiet + 1 } else { 0 };
    }

    // golden-section polish of the highest local maxima of the grid
    let mut peaks: Vec<usize> = (1..n)
        .filter(|&k| vals[k] >= vals[k - 1] && vals[k] >= vals[k + 1])
        .collect();
    peaks.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    peaks.truncate(ENVELOPE_PEAKS);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for k in peaks {
        let (mut a, mut b) = (x_at(k - 1, n), x_at(k + 1, n));
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut sc, mut sd) = (score(c)?, score(d)?);
        for _ in 0..200 {
            if b - a <= 1e-15 * b.abs().max(1.0) {
                break;
            }
            if sc > sd {
                b = d;
                d = c;
                sd = sc;
                c = b - phi * (b - a);
                sc = score(c)?;
            } else {
                a = c;
                c = d;
                sc = sd;
                d = a + phi * (b - a);
                sd = score(d)?;
            }
        }
        best = best.max(sc).max(sd);
    }
    Ok((sign * best).exp())
}

/// `ρ·∫_{t0}^t f(s)/s ds`, a smooth increasing equivalent of `f ∈ RV_ρ`,
/// `ρ > 0`. For `ρ < 0` the construction is applied to `1/f` and inverted,
/// giving a smooth decreasing equivalent. The result lives on `[2·t0, ∞)`.
pub fn smooth_equivalent(f: &TailFunction, rho: f64, t0: f64) -> Result<TailFunction> {
    if rho == 0.0 {
        return Err(Error::Unsupported(
            "smooth equivalent needs ρ ≠ 0; the Karamata ratio is degenerate for slow variation".into(),
        ));
    }
    if !(t0 > 0.0) || t0 < f.t0() {
        return Err(Error::InvalidArgument(format!(
            "origin must be positive and at least t0 = {}, got {t0}",
            f.t0()
        )));
    }
    let base = if rho > 0.0 { f.clone() } else { f.transform(Transform::Reciprocal)? };
    let sign = rho.signum();
    let ln_r = rho.abs().ln();
    // ∫_{ln t0}^{ln t} base(e^u)/base(t) du
    let relative_integral = {
        let base = base.clone();
        Arc::new(move |t: f64| -> Result<f64> {
            let lt = base.ln_eval(t)?;
            let cfg = QuadConfig::with_rel_tol(1e-11);
            Ok(integrate(|u| Ok((base.ln_eval(u.exp())? - lt).exp()), t0.ln(), t.ln(), &cfg)?.value)
        })
    };
    let (ji, jd) = (relative_integral.clone(), relative_integral);
    let ln_eval = move |t: f64| -> f64 {
        match (base.ln_eval(t), ji(t)) {
            (Ok(lb), Ok(j)) => sign * (ln_r + lb + j.ln()),
            _ => f64::NAN,
        }
    };
    let dlog = Arc::new(move |t: f64| jd(t).map(|j| sign / (t * j)).unwrap_or(f64::NAN));
    Ok(TailFunction::from_log(
        format!("smooth equivalent of {}", f.label()),
        2.0 * t0,
        ln_eval,
        Some(dlog),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcmodel::catalog;
    use crate::numlimit::Verdict;
    use std::f64::consts::{E, PI};

    fn analytic(
        label: &str,
        t0: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> TailFunction {
        TailFunction::analytic(label, t0, f, Some(d)).unwrap()
    }

    #[test]
    fn pure_power_has_zero_epsilon_and_unit_c() {
        let f = TailFunction::power_law(1.0, 2.0, 1.0);
        let r = karamata_decompose(&f, 2.0, 1.0, &RepresentOptions::default()).unwrap();
        for s in &r.samples {
            assert!(s.component.abs() < 1e-12);
            assert!((s.companion - 1.0).abs() < 1e-12);
        }
        assert!(r.calibration_residual < 1e-12);
        assert!(r.trend_halves());
    }

    #[test]
    fn log_factor_gives_inverse_log_epsilon() {
        let f = analytic("t^2 log t", E, |t| t * t * t.ln(), |t| 2.0 * t * t.ln() + t);
        let r = karamata_decompose(&f, 2.0, E, &RepresentOptions::default()).unwrap();
        for s in &r.samples {
            assert!((s.component - 1.0 / s.t.ln()).abs() < 1e-12);
            assert!((s.companion - 1.0).abs() < 1e-8, "{s:?}");
        }
        let e8 = 8f64.exp();
        let eps = epsilon(&f, 2.0, e8).unwrap();
        assert!((eps - 0.125).abs() < 1e-12);
        assert!(r.calibration_residual < 1e-6);
        assert!(r.residual < 1e-6);
    }

    #[test]
    fn inverse_log_is_slowly_varying() {
        let f = analytic("1/log t", E, |t| 1.0 / t.ln(), |t| -1.0 / (t * t.ln().powi(2)));
        let r = karamata_decompose(&f, 0.0, E, &RepresentOptions::default()).unwrap();
        for s in &r.samples {
            assert!((s.component + 1.0 / s.t.ln()).abs() < 1e-12);
        }
        assert!(r.trend_halves());
    }

    #[test]
    fn wrong_index_is_rejected() {
        let f = TailFunction::power_law(1.0, 2.0, 1.0);
        assert!(karamata_decompose(&f, -1.0, 1.0, &RepresentOptions::default()).is_err());
    }

    #[test]
    fn scaling_leaves_epsilon_and_doubles_c() {
        let f = catalog::frechet(2.0).unwrap();
        let f = f.survival().clone();
        let f2 = f.transform(Transform::Scale(2.0)).unwrap();
        let o = RepresentOptions::default();
        let a = karamata_decompose(&f, -2.0, 1.0, &o).unwrap();
        let b = karamata_decompose(&f2, -2.0, 1.0, &o).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.component, y.component);
            assert!((y.companion / x.companion - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_part_of_log_over_t() {
        let f = analytic("3 log t / t", E, |t| 3.0 * t.ln() / t, |t| 3.0 * (1.0 - t.ln()) / (t * t));
        let l = normalized_sv(&f, -1.0, E, &RepresentOptions::default()).unwrap();
        for t in [1e3, 1e8, 1e14] {
            let ratio = l.eval(t).unwrap() / (3.0 * t.ln());
            assert!((ratio - 1.0).abs() < 1e-8, "{t}: {ratio}");
        }
    }

    #[test]
    fn normalized_part_of_perturbed_power() {
        let f = analytic(
            "(1 + sin t/t) t^2",
            1.0,
            |t| (1.0 + t.sin() / t) * t * t,
            |t| 2.0 * t + t.sin() + t * t.cos(),
        );
        let l = normalized_sv(&f, 2.0, 1.0, &RepresentOptions::default()).unwrap();
        for t in [1e13, 1e14, 1e15] {
            assert!((l.eval(t).unwrap() - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn exponential_has_unit_a() {
        let e = catalog::exponential(1.0).unwrap();
        let g = TailFunction::constant(1.0, 0.0);
        let r = gamma_decompose(e.survival(), -1.0, &g, 0.0, &RepresentOptions::default()).unwrap();
        let known: Vec<_> = r.samples.iter().filter(|s| s.component.is_finite()).collect();
        assert!(known.last().unwrap().t > 1e9);
        for s in known {
            assert!((s.component - 1.0).abs() < 1e-9, "{s:?}");
        }
        assert!(r.samples.iter().all(|s| s.companion.abs() < 1e-6));
    }

    #[test]
    fn power_factor_is_absorbed_in_a() {
        let f = TailFunction::from_log("t^3 e^-t", 1.0, |t| 3.0 * t.ln() - t, Some(Arc::new(|t| 3.0 / t - 1.0)));
        let g = TailFunction::constant(1.0, 1.0);
        let r = gamma_decompose(&f, -1.0, &g, 1.0, &RepresentOptions::default()).unwrap();
        for s in r.samples.iter().filter(|s| s.component.is_finite()) {
            let want = s.t.powi(3) * (-1f64).exp();
            assert!((s.component / want - 1.0).abs() < 1e-6, "{s:?}");
        }
        for s in &r.samples {
            assert!((s.companion - 3.0 / s.t).abs() < 1e-6 * (3.0 / s.t) + 1e-9, "{s:?}");
        }
        assert!(r.residual < 1e-2);
    }

    #[test]
    fn normal_a_trend_vanishes() {
        let n = catalog::standard_normal().unwrap();
        let g = TailFunction::power_law(1.0, -1.0, 1.0);
        let r = gamma_decompose(n.survival(), -1.0, &g, 1.0, &RepresentOptions::default()).unwrap();
        assert!(r.final_trend().abs() <= 1e-2);
        assert!(r.trend.is_finite_near(0.0, 1e-2), "{:?}", r.trend);
        // A(t)·t → e^{-1/2}/√(2π) where A is still resolved
        let c = (-0.5f64).exp() / (2.0 * PI).sqrt();
        let s = r.samples.iter().filter(|s| s.component.is_finite()).last().unwrap();
        assert!(s.t > 1e4);
        assert!((s.component * s.t / c - 1.0).abs() < 1e-6, "{s:?}");
        assert!(r.residual < 1e-2);
    }

    #[test]
    fn envelope_of_monotone_functions_is_the_function() {
        let up = TailFunction::power_law(1.0, 2.0, 1.0);
        assert_eq!(monotone_envelope(&up, Envelope::Sup, 50.0).unwrap(), up.eval(50.0).unwrap());
        let down = TailFunction::power_law(1.0, -2.0, 1.0);
        let v = monotone_envelope(&down, Envelope::Inf, 50.0).unwrap();
        assert!((v / down.eval(50.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn envelope_of_oscillating_power() {
        let f = TailFunction::analytic("t^2 (2 + sin t)/3", 1.0, |t| t * t * (2.0 + t.sin()) / 3.0, None::<fn(f64) -> f64>)
            .unwrap();
        let t = PI / 2.0 + 2.0 * PI * 1000.0;
        let r = monotone_envelope(&f, Envelope::Sup, t).unwrap() / f.eval(t).unwrap();
        assert!((1.0..=1.0 + 3.0 / t).contains(&r), "{r}");
        // at a trough the envelope is the previous crest: max of s^2 (2 + sin s)/3
        let t = 1.5 * PI + 2.0 * PI * 100.0;
        let env = monotone_envelope(&f, Envelope::Sup, t).unwrap();
        let mut crest: f64 = 0.0;
        let mut s = t - 2.0 * PI;
        while s < t {
            crest = crest.max(f.eval(s).unwrap());
            s += 1e-5;
        }
        assert!((env / crest - 1.0).abs() < 1e-6, "{env} vs {crest}");
    }

    #[test]
    fn smooth_equivalent_of_square() {
        let f = TailFunction::power_law(1.0, 2.0, 1.0);
        let s = smooth_equivalent(&f, 2.0, 1.0).unwrap();
        for t in [3.0, 100.0, 1e10] {
            let want: f64 = t * t - 1.0;
            assert!((s.eval(t).unwrap() / want - 1.0).abs() < 1e-9);
        }
        let grid = ProbeGrid::default();
        let vals: Vec<f64> = grid.points().iter().map(|&t| s.ln_eval(t).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn smooth_equivalent_of_t_log_t() {
        let f = analytic("t log t", E, |t| t * t.ln(), |t| t.ln() + 1.0);
        let s = smooth_equivalent(&f, 1.0, E).unwrap();
        let grid = ProbeGrid::default();
        // ∫_e^t log s ds = t log t − t
        for t in grid.points() {
            let want = t * t.ln() - t;
            assert!((s.eval(t).unwrap() / want - 1.0).abs() < 1e-8, "{t}");
        }
        let ratios: Vec<f64> = grid.points().iter().map(|&t| s.eval(t).unwrap() / f.eval(t).unwrap()).collect();
        let est = estimate_sequence(&ratios, grid, &LimitOptions::default());
        assert!(est.is_finite_near(1.0, 1e-2), "{est:?}");
    }

    #[test]
    fn smooth_equivalent_reciprocal_route() {
        let f = TailFunction::power_law(1.0, -3.0, 1.0);
        let s = smooth_equivalent(&f, -3.0, 1.0).unwrap();
        let pts = ProbeGrid::default().points();
        let vals: Vec<f64> = pts.iter().map(|&t| s.ln_eval(t).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        let t: f64 = 1e5;
        assert!((s.eval(t).unwrap() * t.powi(3) - 1.0).abs() < 1e-9);
        assert!(matches!(smooth_equivalent(&f, 0.0, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn csv_has_fixed_header_and_sorted_rows() {
        let f = TailFunction::power_law(1.0, 2.0, 1.0);
        let r = karamata_decompose(&f, 2.0, 1.0, &RepresentOptions::default()).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,epsilon_or_A,c_or_B,residual"));
        let ts: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert_eq!(ts.len(), 48 + 8);
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert!(matches!(r.trend.verdict, Verdict::Finite(_)));
    }
}
