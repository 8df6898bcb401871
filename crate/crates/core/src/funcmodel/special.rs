//! Normal-tail special functions evaluated in log space.

use std::f64::consts::SQRT_2;

use libm::erfc;
use statrs::function::erf::erfc_inv;

/// `ln √(2π)`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Above this point the Mills ratio comes from its continued fraction.
const CF_SWITCH: f64 = 8.0;

pub fn ln_normal_pdf(t: f64) -> f64 {
    -0.5 * t * t - LN_SQRT_2PI
}

/// Mills ratio `Φ̄(t) / φ(t)`.
pub fn mills_ratio(t: f64) -> f64 {
    if t < CF_SWITCH {
        normal_sf(t) / ln_normal_pdf(t).exp()
    } else {
        // Laplace continued fraction 1/(t + 1/(t + 2/(t + 3/(t + ...)))),
        // evaluated backwards.
        let mut v = t;
        for k in (1..=120).rev() {
            v = t + k as f64 / v;
        }
        1.0 / v
    }
}

/// `1/m(t) − t`, i.e. `d/dt ln(1/m(t))·m(t)`, without cancellation for large `t`.
pub fn inv_mills_minus_t(t: f64) -> f64 {
    if t < CF_SWITCH {
        1.0 / mills_ratio(t) - t
    } else {
        // 1/m(t) = t + 1/(t + 2/(t + 3/(t + ...)))
        let mut v = t;
        for k in (2..=120).rev() {
            v = t + k as f64 / v;
        }
        1.0 / v
    }
}

pub fn normal_sf(t: f64) -> f64 {
    0.5 * erfc(t / SQRT_2)
}

/// `ln Φ̄(t)`, finite for every finite `t`.
pub fn ln_normal_sf(t: f64) -> f64 {
    if t < CF_SWITCH {
        normal_sf(t).ln()
    } else {
        ln_normal_pdf(t) + mills_ratio(t).ln()
    }
}

/// Logarithmic derivative of the normal survival function, `-φ(t)/Φ̄(t)`.
pub fn normal_sf_log_deriv(t: f64) -> f64 {
    -1.0 / mills_ratio(t)
}

/// Standard normal quantile `Φ^{-1}(u)` for `u ∈ (0, 1)`.
pub fn normal_quantile(u: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * u)
}

/// Standard normal upper quantile `Φ̄^{-1}(p)`, accurate for tiny `p`.
pub fn normal_upper_quantile(p: f64) -> f64 {
    SQRT_2 * erfc_inv(2.0 * p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continued_fraction_matches_erfc_at_switch() {
        // 40-digit references for ln Φ̄(t)
        let refs = [
            (8.0, -35.013_437_159_914_549_9),
            (9.0, -43.628_149_113_332_115_5),
            (12.0, -75.410_673_001_568_795_9),
        ];
        for (t, want) in refs {
            let cf = ln_normal_sf(t);
            assert!((cf - want).abs() < 1e-14 * want.abs(), "t={t}: {cf} vs {want}");
        }
        let below = ln_normal_sf(CF_SWITCH - 1e-12);
        let above = ln_normal_sf(CF_SWITCH);
        assert!((below - above).abs() < 1e-9);
    }

    #[test]
    fn far_tail_stays_finite() {
        let v = ln_normal_sf(1e15);
        assert!(v.is_finite());
        assert!((v / (-0.5e30) - 1.0).abs() < 1e-12);
        assert!((normal_sf_log_deriv(1e6) / -1e6 - 1.0).abs() < 1e-11);
    }

    #[test]
    fn inverse_mills_excess_is_continuous_and_small() {
        let below = inv_mills_minus_t(CF_SWITCH - 1e-9);
        let above = inv_mills_minus_t(CF_SWITCH);
        assert!((below - above).abs() < 1e-9, "{below} vs {above}");
        // 1/m(t) − t ~ 1/t − 2/t³
        let t = 1e8;
        assert!((inv_mills_minus_t(t) * t - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quantile_round_trip() {
        for u in [0.01, 0.3, 0.5, 0.9, 0.9999] {
            let x = normal_quantile(u);
            assert!((1.0 - normal_sf(x) - u).abs() < 1e-10, "u={u}: x={x}");
        }
        let q = normal_upper_quantile(1e-4);
        assert!((q - 3.719_016_485_455_68).abs() < 1e-9);
    }
}
