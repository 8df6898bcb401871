//! Adaptive Gauss–Kronrod quadrature.
//!
//! A 21-point Kronrod rule with its embedded 10-point Gauss rule drives a global
//! adaptive bisection: the interval with the largest error estimate is split until
//! the summed error meets `max(abs_floor, rel_tol * |I|)`. Error estimates follow
//! the QUADPACK `qk21` heuristics, including the round-off floor, so integrands
//! that carry finite-difference noise still terminate.
//!
//! Two drivers sit on top of the basic routine:
//!
//! - [`integrate_span`] cuts very wide ranges (more than ten decades) into
//!   log-spaced panels before refining, so integrands like `t^k` that vary over
//!   many orders of magnitude are resolved panel by panel.
//! - [`integrate_semi_infinite`] integrates over `[0, ∞)` in geometrically
//!   doubling panels and stops on relative stabilization of the running sum.
//!   Survival functions underflow long before such an integral is "done" in an
//!   absolute sense, so absolute smallness is never the stopping rule.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_814_200_802,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances and limits for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub rel_tol: f64,
    /// Absolute error floor; keeps underflowing integrands from stalling.
    pub abs_floor: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_floor: 1e-300,
            max_intervals: 2000,
        }
    }
}

impl QuadConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

/// Value and error estimate of a definite integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F>(f: &F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    let fc = f(center)?;
    let mut resk = WGK[10] * fc;
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for j in 0..5 {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        resg += WG[j] * (f1 + f2);
        resk += WGK[jtw] * (f1 + f2);
        resabs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        resk += WGK[jtwm1] * (f1 + f2);
        resabs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }

    let reskh = resk * 0.5;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }

    let result = resk * half;
    resabs *= abs_half;
    resasc *= abs_half;
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    if !result.is_finite() || !err.is_finite() {
        return Err(Error::Quadrature {
            a,
            b,
            estimate: result,
            error: err,
        });
    }
    Ok((result, err))
}

/// Adaptive integration of `f` over the finite interval `[a, b]`.
pub fn integrate<F>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Integral>
where
    F: Fn(f64) -> Result<f64>,
{
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (value, error) = kronrod21(&f, a, b)?;
    let mut evaluations = 21;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, error });
    let mut total = value;
    let mut total_err = error;

    loop {
        if total_err <= cfg.abs_floor.max(cfg.rel_tol * total.abs()) {
            break;
        }
        if heap.len() >= cfg.max_intervals {
            return Err(Error::Quadrature {
                a,
                b,
                estimate: total,
                error: total_err,
            });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval no longer splittable in floating point
            return Err(Error::Quadrature {
                a,
                b,
                estimate: total,
                error: total_err,
            });
        }
        let (v1, e1) = kronrod21(&f, worst.a, mid)?;
        let (v2, e2) = kronrod21(&f, mid, worst.b)?;
        evaluations += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }

    // Re-sum to shed the drift of the running update.
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(Integral {
        value,
        error,
        evaluations,
    })
}

/// Breakpoints that cut `[a, b]` into decade panels when it spans more than
/// ten decades; otherwise just the two endpoints.
pub fn panel_breaks(a: f64, b: f64) -> Vec<f64> {
    let lo = a.max(0.0);
    let spans_wide = if lo > 0.0 { b / lo > 1e10 } else { b > 1e10 };
    if b <= a || !spans_wide {
        return vec![a, b];
    }
    let mut breaks = vec![a];
    let mut edge = if lo > 0.0 { lo * 10.0 } else { 1.0 };
    while edge < b {
        if edge > a {
            breaks.push(edge);
        }
        edge *= 10.0;
    }
    breaks.push(b);
    breaks
}

/// Integrates over `[a, b]`, splitting into log-spaced panels first when the
/// range spans more than ten decades.
pub fn integrate_span<F>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Integral>
where
    F: Fn(f64) -> Result<f64>,
{
    let breaks = panel_breaks(a, b);
    let mut out = Integral {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    for w in breaks.windows(2) {
        let part = integrate(&f, w[0], w[1], cfg)?;
        out.value += part.value;
        out.error += part.error;
        out.evaluations += part.evaluations;
    }
    Ok(out)
}

/// Integrates `f(y)` over `y ∈ [0, ∞)` using panels `[0, s], [s, 2s], [2s, 4s], …`.
///
/// Stops once two consecutive panels each contribute less than `rel_tol` of the
/// running total. Returns `None` when the sum has not stabilized by the time the
/// panel edge passes `y_max` (the integral is divergent, or too heavy to resolve).
pub fn integrate_semi_infinite<F>(
    f: F,
    scale: f64,
    y_max: f64,
    cfg: &QuadConfig,
) -> Result<Option<Integral>>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut lo = 0.0;
    let mut hi = scale;
    let mut total = Integral {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    let mut quiet_panels = 0;
    while lo < y_max {
        let part = integrate(&f, lo, hi.min(y_max), cfg)?;
        total.value += part.value;
        total.error += part.error;
        total.evaluations += part.evaluations;
        if part.value.abs() <= cfg.rel_tol * total.value.abs() {
            quiet_panels += 1;
            if quiet_panels >= 2 {
                return Ok(Some(total));
            }
        } else {
            quiet_panels = 0;
        }
        lo = hi;
        hi *= 2.0;
    }
    Ok(None)
}

/// Running totals of `∫_0^{edge} f` at the geometric edges `s, rs, r²s, …`
/// up to `y_max` (the last edge is clipped to `y_max`).
pub fn geometric_partial_sums<F>(f: F, scale: f64, ratio: f64, y_max: f64, cfg: &QuadConfig) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut sums = Vec::new();
    let mut lo = 0.0;
    let mut hi = scale;
    let mut total = 0.0;
    while lo < y_max {
        total += integrate(&f, lo, hi.min(y_max), cfg)?.value;
        sums.push(total);
        lo = hi;
        hi *= ratio;
    }
    Ok(sums)
}
