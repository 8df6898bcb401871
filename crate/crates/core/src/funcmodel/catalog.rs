//! Closed-form reference distributions with known tail classes.

use std::f64::consts::E;
use std::sync::Arc;

use crate::classify::{TailClass, TailVariant};
use crate::error::{Error, Result};
use crate::funcmodel::special::{
    inv_mills_minus_t, ln_normal_pdf, ln_normal_sf, mills_ratio, normal_quantile, normal_sf_log_deriv,
};
use crate::funcmodel::{Distribution, Sampler, TailFunction};
use crate::numlimit::ProbeGrid;

type Dlog = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

fn dlog(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Option<Dlog> {
    Some(Arc::new(f))
}

fn sampler(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Option<Sampler> {
    Some(Arc::new(f))
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    /// Short name with parameters, e.g. `Pareto(2)`.
    pub name: String,
    pub distribution: Distribution,
    /// Class of the survival function.
    pub truth: TailClass,
    /// Known auxiliary function for Γ entries.
    pub truth_aux: Option<TailFunction>,
    /// Class of the density, where the density is in the catalog.
    pub density_truth: Option<TailClass>,
    /// Probe grid to use instead of the default, for slowly converging tails.
    pub grid: Option<ProbeGrid>,
}

impl CatalogEntry {
    pub fn survival(&self) -> &TailFunction {
        self.distribution.survival()
    }

    pub fn grid(&self) -> ProbeGrid {
        self.grid.unwrap_or_default()
    }

    fn gamma(name: String, distribution: Distribution, g: TailFunction) -> Self {
        Self {
            name,
            distribution,
            truth: TailClass::truth(TailVariant::Gamma {
                alpha: -1.0,
                g: g.clone(),
                scale: 1.0,
            }),
            density_truth: Some(TailClass::truth(TailVariant::Gamma {
                alpha: -1.0,
                g: g.clone(),
                scale: 1.0,
            })),
            truth_aux: Some(g),
            grid: None,
        }
    }

    fn regular(name: String, distribution: Distribution, rho: f64, density_rho: f64) -> Self {
        Self {
            name,
            distribution,
            truth: TailClass::truth(TailVariant::Regular { rho }),
            truth_aux: None,
            density_truth: Some(TailClass::truth(TailVariant::Regular { rho: density_rho })),
            grid: None,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

/// `F̄(t) = e^{-λt}`, `t ≥ 0`; `Γ_{-1}(1/λ)`.
pub fn exponential(lambda: f64) -> Result<CatalogEntry> {
    positive("lambda", lambda)?;
    let surv = TailFunction::from_log(format!("exp(-{lambda}t)"), 0.0, move |t| -lambda * t, dlog(move |_| -lambda));
    let ll = lambda.ln();
    let dens = TailFunction::from_log(
        format!("{lambda}exp(-{lambda}t)"),
        0.0,
        move |t| ll - lambda * t,
        dlog(move |_| -lambda),
    );
    let d = Distribution::new(
        format!("Exponential({lambda})"),
        surv,
        Some(dens),
        sampler(move |u| -(-u).ln_1p() / lambda),
    )?
    .with_hazard(TailFunction::constant(lambda, 0.0));
    Ok(CatalogEntry::gamma(
        format!("Exponential({lambda})"),
        d,
        TailFunction::constant(1.0 / lambda, 0.0),
    ))
}

/// `F̄(t) = t^{-α}`, `t ≥ 1`; `RV_{-α}`.
pub fn pareto(alpha: f64) -> Result<CatalogEntry> {
    positive("alpha", alpha)?;
    let surv = TailFunction::power_law(1.0, -alpha, 1.0);
    let dens = TailFunction::power_law(alpha, -alpha - 1.0, 1.0);
    let d = Distribution::new(
        format!("Pareto({alpha})"),
        surv,
        Some(dens),
        sampler(move |u| (-(-u).ln_1p() / alpha).exp()),
    )?
    .with_hazard(TailFunction::power_law(alpha, -1.0, 1.0));
    Ok(CatalogEntry::regular(format!("Pareto({alpha})"), d, -alpha, -alpha - 1.0))
}

/// Standard normal; survival and density both in `Γ_{-1}(1/t)`.
pub fn standard_normal() -> Result<CatalogEntry> {
    let surv = TailFunction::from_log("normal survival", 0.0, ln_normal_sf, dlog(normal_sf_log_deriv));
    let dens = TailFunction::from_log("normal density", 0.0, ln_normal_pdf, dlog(|t| -t));
    let hazard = TailFunction::from_log(
        "normal hazard",
        0.0,
        |t| -mills_ratio(t).ln(),
        dlog(|t| inv_mills_minus_t(t)),
    );
    let d = Distribution::new("StandardNormal", surv, Some(dens), sampler(normal_quantile))?.with_hazard(hazard);
    Ok(CatalogEntry::gamma(
        "StandardNormal".into(),
        d,
        TailFunction::power_law(1.0, -1.0, 1.0),
    ))
}

/// `F̄(t) = 1/log t`, density `t^{-1}(log t)^{-2}`, `t ≥ e`.
pub fn log_tail() -> Result<CatalogEntry> {
    let surv = TailFunction::from_log("1/log t", E, |t| -t.ln().ln(), dlog(|t: f64| -1.0 / (t * t.ln())));
    let dens = TailFunction::from_log(
        "t^-1 (log t)^-2",
        E,
        |t| -t.ln() - 2.0 * t.ln().ln(),
        dlog(|t: f64| -1.0 / t - 2.0 / (t * t.ln())),
    );
    let d = Distribution::new("LogTail", surv, Some(dens), sampler(|u| (1.0 / (1.0 - u)).exp()))?;
    Ok(CatalogEntry {
        name: "LogTail".into(),
        distribution: d,
        truth: TailClass::truth(TailVariant::Slow),
        truth_aux: None,
        density_truth: Some(TailClass::truth(TailVariant::Regular { rho: -1.0 })),
        grid: None,
    })
}

/// `F̄ = 1/log t` given only as a plain evaluator, so every derivative is a
/// finite difference.
pub fn slow_survival() -> Result<CatalogEntry> {
    let surv = TailFunction::analytic("1/log t", E, |t: f64| 1.0 / t.ln(), None::<fn(f64) -> f64>)?;
    let d = Distribution::new("SlowSurvival", surv, None, None)?;
    Ok(CatalogEntry {
        name: "SlowSurvival".into(),
        distribution: d,
        truth: TailClass::truth(TailVariant::Slow),
        truth_aux: None,
        density_truth: None,
        grid: None,
    })
}

/// Hazard `h(t) = t^k`: `F̄(t) = exp{-t^{k+1}/(k+1)}`, in `Γ_{-1}(t^{-k})`.
pub fn weibull_hazard(k: f64) -> Result<CatalogEntry> {
    if !(k > -1.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!("k must exceed -1, got {k}")));
    }
    let k1 = k + 1.0;
    let surv = TailFunction::from_log(
        format!("exp(-t^{k1}/{k1})"),
        1.0,
        move |t: f64| -t.powf(k1) / k1,
        dlog(move |t: f64| -t.powf(k)),
    );
    let dens = TailFunction::from_log(
        format!("t^{k} exp(-t^{k1}/{k1})"),
        1.0,
        move |t: f64| k * t.ln() - t.powf(k1) / k1,
        dlog(move |t: f64| k / t - t.powf(k)),
    );
    let d = Distribution::new(
        format!("WeibullHazard({k})"),
        surv,
        Some(dens),
        sampler(move |u: f64| (k1 * -(-u).ln_1p()).powf(1.0 / k1)),
    )?
    .with_hazard(TailFunction::power_law(1.0, k, 1.0));
    Ok(CatalogEntry::gamma(
        format!("WeibullHazard({k})"),
        d,
        TailFunction::power_law(1.0, -k, 1.0),
    ))
}

/// Fréchet: `F(t) = exp{-t^{-α}}`; `RV_{-α}`.
pub fn frechet(alpha: f64) -> Result<CatalogEntry> {
    positive("alpha", alpha)?;
    let surv = TailFunction::from_log(
        format!("1-exp(-t^-{alpha})"),
        1.0,
        move |t: f64| (-(-t.powf(-alpha)).exp_m1()).ln(),
        dlog(move |t: f64| {
            let y = t.powf(-alpha);
            -(alpha / t) * y / y.exp_m1()
        }),
    );
    let la = alpha.ln();
    let dens = TailFunction::from_log(
        format!("frechet({alpha}) density"),
        1.0,
        move |t: f64| la - (alpha + 1.0) * t.ln() - t.powf(-alpha),
        dlog(move |t: f64| (-(alpha + 1.0) + alpha * t.powf(-alpha)) / t),
    );
    let d = Distribution::new(
        format!("Frechet({alpha})"),
        surv,
        Some(dens),
        sampler(move |u: f64| (-u.ln()).powf(-1.0 / alpha)),
    )?;
    Ok(CatalogEntry::regular(format!("Frechet({alpha})"), d, -alpha, -alpha - 1.0))
}

/// Lognormal(μ, σ); in `Γ_{-1}(1/h)` with `g(t) ≈ σ²t/log t`.
///
/// `g(t)/t` decays only like `1/log t`, so the entry carries a probe grid
/// reaching `1e300`.
pub fn lognormal(mu: f64, sigma: f64) -> Result<CatalogEntry> {
    positive("sigma", sigma)?;
    let z = move |t: f64| (t.ln() - mu) / sigma;
    let t0 = mu.exp();
    let surv = TailFunction::from_log(
        format!("lognormal({mu},{sigma}) survival"),
        t0,
        move |t| ln_normal_sf(z(t)),
        dlog(move |t| -1.0 / (sigma * t * mills_ratio(z(t)))),
    );
    let ls = sigma.ln();
    let dens = TailFunction::from_log(
        format!("lognormal({mu},{sigma}) density"),
        t0,
        move |t: f64| ln_normal_pdf(z(t)) - ls - t.ln(),
        dlog(move |t: f64| -(z(t) / sigma + 1.0) / t),
    );
    let hazard = TailFunction::from_log(
        format!("lognormal({mu},{sigma}) hazard"),
        t0,
        move |t: f64| -ls - t.ln() - mills_ratio(z(t)).ln(),
        dlog(move |t: f64| -1.0 / t + inv_mills_minus_t(z(t)) / (sigma * t)),
    );
    let g = TailFunction::from_log(
        format!("lognormal({mu},{sigma}) reciprocal hazard"),
        t0,
        move |t: f64| ls + t.ln() + mills_ratio(z(t)).ln(),
        dlog(move |t: f64| 1.0 / t - inv_mills_minus_t(z(t)) / (sigma * t)),
    );
    let d = Distribution::new(
        format!("Lognormal({mu},{sigma})"),
        surv,
        Some(dens),
        sampler(move |u| (mu + sigma * normal_quantile(u)).exp()),
    )?
    .with_hazard(hazard);
    let mut entry = CatalogEntry::gamma(format!("Lognormal({mu},{sigma})"), d, g);
    entry.grid = Some(ProbeGrid::spanning(8.0, 1e300, 48)?);
    Ok(entry)
}

/// Reference entries with default parameters.
pub fn catalog() -> Vec<CatalogEntry> {
    [
        exponential(1.0),
        exponential(2.0),
        pareto(2.0),
        pareto(3.0),
        standard_normal(),
        log_tail(),
        slow_survival(),
        weibull_hazard(1.0),
        weibull_hazard(2.0),
        weibull_hazard(-0.5),
        frechet(2.0),
        frechet(3.5),
        lognormal(0.0, 1.0),
    ]
    .into_iter()
    .map(|e| e.expect("catalog parameters are valid"))
    .collect()
}

/// Looks up a family by name, taking parameters from `params`.
pub fn by_name(family: &str, params: &[(String, f64)]) -> Result<CatalogEntry> {
    let get = |key: &str, default: Option<f64>| -> Result<f64> {
        params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .or(default)
            .ok_or_else(|| Error::InvalidArgument(format!("family {family} needs parameter {key}")))
    };
    let allowed: &[&str] = match family {
        "exponential" => &["lambda"],
        "pareto" | "frechet" => &["alpha"],
        "weibull_hazard" => &["k"],
        "lognormal" => &["mu", "sigma"],
        "normal" | "standard_normal" | "log_tail" | "slow_survival" => &[],
        _ => return Err(Error::InvalidArgument(format!("unknown family {family}"))),
    };
    if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(Error::InvalidArgument(format!("family {family} has no parameter {k}")));
    }
    match family {
        "exponential" => exponential(get("lambda", Some(1.0))?),
        "pareto" => pareto(get("alpha", None)?),
        "frechet" => frechet(get("alpha", None)?),
        "weibull_hazard" => weibull_hazard(get("k", None)?),
        "lognormal" => lognormal(get("mu", Some(0.0))?, get("sigma", Some(1.0))?),
        "normal" | "standard_normal" => standard_normal(),
        "log_tail" => log_tail(),
        _ => slow_survival(),
    }
}

/// Family names accepted by [`by_name`].
pub const FAMILIES: [&str; 9] = [
    "exponential",
    "pareto",
    "normal",
    "standard_normal",
    "log_tail",
    "slow_survival",
    "weibull_hazard",
    "frechet",
    "lognormal",
];
