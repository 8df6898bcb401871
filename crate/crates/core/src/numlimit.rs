//! Numerical limits at infinity.
//!
//! A quantity `q(t)` is probed on a geometric grid `t_k = T0 * r^k`, and the probe
//! sequence is accelerated with iterated Aitken Δ². Every limit in the toolkit
//! (von Mises indices, ratio limits, Π-limits, ...) goes through
//! [`estimate_limit`], so the verdict rules live in one place:
//!
//! 1. any non-finite probe gives `Undetermined`;
//! 2. sign changes of consecutive differences in at least half of the tail
//!    probes give `Undetermined` (oscillation);
//! 3. a small enough residual with settling accelerated differences gives
//!    `Finite(v)`;
//! 4. raw values beyond the divergence threshold and monotone over the last four
//!    probes give `PlusInfinity` / `MinusInfinity`;
//! 5. anything else is `Undetermined`.
//!
//! The residual is an error bar, not just the spread of the accelerated tail: it is
//! the larger of that spread and a tenth of the distance the extrapolation moved
//! away from the last raw probe, scaled by `max(1, |v|)`.

use std::fmt;

use crate::error::{Error, Result};

/// Geometric probe grid `t_k = start * ratio^k`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeGrid {
    start: f64,
    ratio: f64,
    count: usize,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self {
            start: 8.0,
            ratio: 2.0,
            count: 48,
        }
    }
}

impl ProbeGrid {
    pub const MIN_COUNT: usize = 8;

    pub fn new(start: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(start.is_finite() && start > 0.0) {
            return Err(Error::InvalidArgument(format!("grid start must be > 0, got {start}")));
        }
        if !(ratio.is_finite() && ratio > 1.0) {
            return Err(Error::InvalidArgument(format!("grid ratio must be > 1, got {ratio}")));
        }
        if count < Self::MIN_COUNT {
            return Err(Error::InvalidArgument(format!(
                "grid count must be >= {}, got {count}",
                Self::MIN_COUNT
            )));
        }
        let last = start * ratio.powi(count as i32 - 1);
        if !last.is_finite() || last > 1e306 {
            return Err(Error::InvalidArgument(format!(
                "grid overflows: {start} * {ratio}^{} is not representable",
                count - 1
            )));
        }
        Ok(Self { start, ratio, count })
    }

    /// Grid with `count` points running from `start` to `end` inclusive.
    pub fn spanning(start: f64, end: f64, count: usize) -> Result<Self> {
        if !(end > start) {
            return Err(Error::InvalidArgument(format!(
                "grid end {end} must exceed start {start}"
            )));
        }
        let ratio = (end / start).powf(1.0 / (count.max(2) - 1) as f64);
        Self::new(start, ratio, count)
    }

    /// Same grid shape moved to begin at `start`.
    pub fn starting_at(&self, start: f64) -> Result<Self> {
        Self::new(start, self.ratio, self.count)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn point(&self, k: usize) -> f64 {
        self.start * self.ratio.powi(k as i32)
    }

    pub fn last(&self) -> f64 {
        self.point(self.count - 1)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.point(k)).collect()
    }

    /// `n` probes at geometric midpoints between grid points, spread evenly over
    /// the grid. Used as validation probes that the calibration never touched.
    pub fn interleaved(&self, n: usize) -> Vec<f64> {
        let gaps = self.count - 1;
        let n = n.min(gaps);
        let half = self.ratio.sqrt();
        (0..n)
            .map(|i| {
                let k = if n == 1 { gaps - 1 } else { i * (gaps - 1) / (n - 1) };
                self.point(k) * half
            })
            .collect()
    }
}

impl fmt::Display for ProbeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "T0={} r={} K={} (t_max={:.3e})",
            self.start,
            self.ratio,
            self.count,
            self.last()
        )
    }
}

/// Knobs for [`estimate_limit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitOptions {
    /// Residual threshold for a `Finite` verdict.
    pub tol: f64,
    /// Magnitude the raw tail must exceed for an infinite verdict.
    pub divergence: f64,
    /// Relative size below which a difference counts as round-off.
    pub noise: f64,
    /// Maximum number of Aitken sweeps.
    pub max_sweeps: usize,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self {
            tol: 5e-3,
            divergence: 1e6,
            noise: 1e-12,
            max_sweeps: 8,
        }
    }
}

impl LimitOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
    Undetermined,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Finite(v) => write!(f, "Finite({v:.6})"),
            Verdict::PlusInfinity => write!(f, "+inf"),
            Verdict::MinusInfinity => write!(f, "-inf"),
            Verdict::Undetermined => write!(f, "undetermined"),
        }
    }
}

/// Outcome of a numerical limit.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitEstimate {
    pub verdict: Verdict,
    /// Last four probe values.
    pub raw_tail: Vec<f64>,
    /// Last four accelerated values (raw values when no sweep was used).
    pub accel_tail: Vec<f64>,
    /// Error bar scaled by `max(1, |value|)`; infinite for non-finite verdicts.
    pub residual: f64,
    /// Number of Aitken sweeps behind `accel_tail`.
    pub sweeps: usize,
    pub grid: ProbeGrid,
    pub note: Option<String>,
}

impl LimitEstimate {
    pub fn value(&self) -> Option<f64> {
        match self.verdict {
            Verdict::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// `Finite(v)` with `|v - target| <= tol`.
    pub fn is_finite_near(&self, target: f64, tol: f64) -> bool {
        self.value().is_some_and(|v| (v - target).abs() <= tol)
    }

    pub fn is_determinate(&self) -> bool {
        self.verdict != Verdict::Undetermined
    }

    fn undetermined(grid: ProbeGrid, raw: &[f64], note: String) -> Self {
        let raw_tail = tail(raw, 4);
        Self {
            verdict: Verdict::Undetermined,
            accel_tail: raw_tail.clone(),
            raw_tail,
            residual: f64::INFINITY,
            sweeps: 0,
            grid,
            note: Some(note),
        }
    }
}

fn tail(v: &[f64], n: usize) -> Vec<f64> {
    v[v.len().saturating_sub(n)..].to_vec()
}

fn spread(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo
}

/// One Aitken Δ² sweep: `s_k - (Δs_k)^2 / Δ²s_k`.
fn aitken_sweep(s: &[f64], noise: f64) -> Vec<f64> {
    s.windows(3)
        .map(|w| {
            let (a, b, c) = (w[0], w[1], w[2]);
            let d1 = b - a;
            let d2 = c - b;
            let scale = a.abs().max(b.abs()).max(c.abs()).max(1.0);
            let dd = d2 - d1;
            if d1.abs() <= noise * scale && d2.abs() <= noise * scale {
                c
            } else if dd.abs() <= 1e-14 * (d1.abs() + d2.abs()) {
                // arithmetic progression: no geometric model to extrapolate
                c
            } else {
                let v = c - d2 * d2 / dd;
                if v.is_finite() {
                    v
                } else {
                    c
                }
            }
        })
        .collect()
}

fn count_sign_changes(s: &[f64], noise: f64) -> (usize, usize) {
    let diffs: Vec<f64> = s
        .windows(2)
        .filter_map(|w| {
            let d = w[1] - w[0];
            let scale = w[0].abs().max(w[1].abs()).max(1.0);
            (d.abs() > noise * scale).then_some(d)
        })
        .collect();
    let changes = diffs
        .windows(2)
        .filter(|w| w[0].signum() != w[1].signum())
        .count();
    (changes, diffs.len())
}

fn settling(accel: &[f64], noise: f64) -> bool {
    // 5 values -> 4 differences -> 3 comparisons; require 2 non-increasing.
    let t = tail(accel, 5);
    let scale = t.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let floor = noise * scale;
    let diffs: Vec<f64> = t
        .windows(2)
        .map(|w| {
            let d = (w[1] - w[0]).abs();
            if d <= floor {
                0.0
            } else {
                d
            }
        })
        .collect();
    let steps = diffs.windows(2).filter(|w| w[1] <= w[0]).count();
    steps >= diffs.len().saturating_sub(1).min(2)
}

/// Limit verdict for a precomputed probe sequence on `grid`.
pub fn estimate_sequence(values: &[f64], grid: ProbeGrid, opts: &LimitOptions) -> LimitEstimate {
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return LimitEstimate::undetermined(
            grid,
            values,
            format!("non-finite value {} at t = {:.6e}", values[k], grid.point(k)),
        );
    }
    if values.len() < ProbeGrid::MIN_COUNT {
        return LimitEstimate::undetermined(grid, values, "too few probes".into());
    }

    let raw_tail = tail(values, 4);
    let last_raw = *values.last().unwrap();

    let tail_len = (values.len() / 2).max(8).min(values.len());
    let (changes, significant) = count_sign_changes(&tail(values, tail_len), opts.noise);
    if significant >= 4 && 2 * changes >= tail_len - 1 {
        return LimitEstimate::undetermined(
            grid,
            values,
            format!("oscillation: {changes} sign changes over the last {tail_len} probes"),
        );
    }

    // Pick the sweep whose tail spread is smallest, preferring sweeps whose
    // tail is still settling over ones that have degenerated into noise.
    let mut level = values.to_vec();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut fallback = (spread(&tail(&level, 4)), 0usize, level.clone());
    let mut consider = |lvl: &Vec<f64>, sweep: usize| {
        let s = spread(&tail(lvl, 4));
        if settling(lvl, opts.noise) && best.as_ref().is_none_or(|b| s < b.0) {
            best = Some((s, sweep, lvl.clone()));
        }
        if s < fallback.0 {
            fallback = (s, sweep, lvl.clone());
        }
    };
    consider(&level, 0);
    for sweep in 1..=opts.max_sweeps {
        if level.len() < 7 {
            break;
        }
        level = aitken_sweep(&level, opts.noise);
        consider(&level, sweep);
    }
    let best = best.unwrap_or(fallback);
    let (tail_spread, sweeps, accel) = best;
    let value = *accel.last().unwrap();
    let scale = value.abs().max(1.0);
    let residual = tail_spread.max((value - last_raw).abs() / 10.0) / scale;

    if residual <= opts.tol && settling(&accel, opts.noise) {
        return LimitEstimate {
            verdict: Verdict::Finite(value),
            raw_tail,
            accel_tail: tail(&accel, 4),
            residual,
            sweeps,
            grid,
            note: None,
        };
    }

    let increasing = raw_tail.windows(2).all(|w| w[1] > w[0]);
    let decreasing = raw_tail.windows(2).all(|w| w[1] < w[0]);
    let verdict = if increasing && raw_tail.iter().all(|&v| v > opts.divergence) {
        Verdict::PlusInfinity
    } else if decreasing && raw_tail.iter().all(|&v| v < -opts.divergence) {
        Verdict::MinusInfinity
    } else {
        Verdict::Undetermined
    };
    let note = (verdict == Verdict::Undetermined).then(|| {
        format!(
            "no convergence: residual {residual:.3e} > tol {:.1e}, last raw {last_raw:.6e}",
            opts.tol
        )
    });
    LimitEstimate {
        verdict,
        raw_tail,
        accel_tail: tail(&accel, 4),
        residual: if verdict == Verdict::Undetermined {
            residual
        } else {
            f64::INFINITY
        },
        sweeps,
        grid,
        note,
    }
}

/// Limit of `f(t)` as `t → ∞`, probed on `grid`.
pub fn estimate_limit<F>(f: F, grid: ProbeGrid, opts: &LimitOptions) -> LimitEstimate
where
    F: Fn(f64) -> f64,
{
    let values: Vec<f64> = grid.points().into_iter().map(f).collect();
    estimate_sequence(&values, grid, opts)
}

/// Like [`estimate_limit`], but when the trailing probes leave the domain where
/// `f` is computable (underflow, overflow, precision loss reported as NaN) the
/// grid is shrunk to the computable prefix, keeping the probe count.
pub fn estimate_limit_fitted<F>(f: F, grid: ProbeGrid, opts: &LimitOptions) -> LimitEstimate
where
    F: Fn(f64) -> f64,
{
    let mut grid = grid;
    let mut refits = 0;
    loop {
        let values: Vec<f64> = grid.points().into_iter().map(&f).collect();
        let ok_prefix = values.iter().take_while(|v| v.is_finite()).count();
        let shrunk = if ok_prefix == values.len()
            || ok_prefix < 2
            || refits >= 4
            || values[ok_prefix..].iter().any(|v| v.is_finite())
        {
            None
        } else {
            let end = grid.point(ok_prefix - 1);
            ProbeGrid::spanning(grid.start(), end, grid.count())
                .ok()
                .filter(|_| end / grid.start() >= 4.0)
        };
        match shrunk {
            Some(g) => {
                grid = g;
                refits += 1;
            }
            None => {
                let mut est = estimate_sequence(&values, grid, opts);
                if refits > 0 {
                    let note = format!("grid refitted to {grid}");
                    est.note = Some(match est.note {
                        Some(n) => format!("{n}; {note}"),
                        None => note,
                    });
                }
                return est;
            }
        }
    }
}

/// Per-`x` limits of `f(t, x)` plus the largest residual across `xs`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyEstimate {
    pub entries: Vec<(f64, LimitEstimate)>,
    /// Max residual over `xs`; infinite if any entry is not `Finite`.
    pub uniform_residual: f64,
}

impl FamilyEstimate {
    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|(_, e)| e.value().is_some())
    }
}

pub fn estimate_limit_family<F>(
    f: F,
    xs: &[f64],
    grid: ProbeGrid,
    opts: &LimitOptions,
) -> FamilyEstimate
where
    F: Fn(f64, f64) -> f64,
{
    let entries: Vec<(f64, LimitEstimate)> = xs
        .iter()
        .map(|&x| (x, estimate_limit_fitted(|t| f(t, x), grid, opts)))
        .collect();
    let uniform_residual = entries
        .iter()
        .map(|(_, e)| if e.value().is_some() { e.residual } else { f64::INFINITY })
        .fold(0.0, f64::max);
    FamilyEstimate {
        entries,
        uniform_residual,
    }
}
