use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::funcmodel::TailFunction;
use crate::numlimit::ProbeGrid;

/// Inverse-CDF sampler: maps a uniform draw `u ∈ [0, 1)` to `F^{-1}(u)`.
pub type Sampler = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A distribution with right support point at `+∞`, seen through its tail.
#[derive(Clone)]
pub struct Distribution {
    survival: TailFunction,
    density: Option<TailFunction>,
    hazard: Option<TailFunction>,
    sampler: Option<Sampler>,
    label: String,
}

impl fmt::Debug for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Distribution")
            .field("label", &self.label)
            .field("survival", &self.survival)
            .field("density", &self.density)
            .field("sampler", &self.sampler.is_some())
            .finish()
    }
}

impl Distribution {
    /// Checks the survival function on the default probe grid: values in
    /// `(0, 1]`, nonincreasing, and (with a density) smaller at the last probe
    /// than at the first.
    pub fn new(
        label: impl Into<String>,
        survival: TailFunction,
        density: Option<TailFunction>,
        sampler: Option<Sampler>,
    ) -> Result<Self> {
        let d = Self {
            survival,
            density,
            hazard: None,
            sampler,
            label: label.into(),
        };
        d.check_survival_on(&ProbeGrid::default())?;
        Ok(d)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn survival(&self) -> &TailFunction {
        &self.survival
    }

    pub fn density(&self) -> Option<&TailFunction> {
        self.density.as_ref()
    }

    /// Supplies a closed-form hazard rate. Without one the hazard is formed as
    /// `ln density − ln survival`, which loses all precision once both
    /// logarithms are huge (Gaussian-type tails far out).
    pub fn with_hazard(mut self, hazard: TailFunction) -> Self {
        self.hazard = Some(hazard);
        self
    }

    pub fn explicit_hazard(&self) -> Option<&TailFunction> {
        self.hazard.as_ref()
    }

    pub fn sampler(&self) -> Option<&Sampler> {
        self.sampler.as_ref()
    }

    pub fn t0(&self) -> f64 {
        self.survival.t0()
    }

    /// Draw via the inverse CDF.
    pub fn sample(&self, u: f64) -> Result<f64> {
        let s = self.sampler.as_ref().ok_or(Error::Missing("sampler"))?;
        Ok(s(u))
    }

    /// Verifies the survival invariants on `grid`. Probes where `ln F̄` is not
    /// computable end the check; they are the domain limit, not a violation.
    pub fn check_survival_on(&self, grid: &ProbeGrid) -> Result<()> {
        let mut probes = vec![self.t0()];
        probes.extend(grid.points().into_iter().filter(|&t| t > self.t0()));
        let mut prev: Option<(f64, f64)> = None;
        let mut first = None;
        let mut last = None;
        for t in probes {
            let Ok(ls) = self.survival.ln_eval(t) else {
                break;
            };
            if ls > 1e-12 {
                return Err(Error::Domain {
                    label: self.label.clone(),
                    t,
                    reason: format!("survival {} exceeds 1", ls.exp()),
                });
            }
            if let Some((pt, pl)) = prev {
                if ls > pl + 1e-12 * pl.abs().max(1.0) {
                    return Err(Error::NotMonotone {
                        label: format!("{} survival (increases between {pt:e} and {t:e})", self.label),
                        violations: 1,
                        pairs: grid.count(),
                    });
                }
            }
            prev = Some((t, ls));
            first.get_or_insert(ls);
            last = Some(ls);
        }
        if self.density.is_some() {
            if let (Some(a), Some(b)) = (first, last) {
                if b > a {
                    return Err(Error::Domain {
                        label: self.label.clone(),
                        t: grid.last(),
                        reason: "survival does not decay".into(),
                    });
                }
            }
        }
        Ok(())
    }
}
