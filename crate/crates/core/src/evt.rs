//! Domains of attraction, normalizing constants and block-maxima simulation.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classify::{classify_tail, ClassifyOptions, TailClass, TailVariant};
use crate::error::{Error, Result};
use crate::funcmodel::Distribution;
use crate::hazard::{reciprocal_hazard_r, HazardView};
use crate::inverses::{generalized_inverse, Side};

/// Extreme-value limit law for normalized maxima.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// `exp(-x^{-α})`, `x > 0`.
    Frechet(f64),
    /// `exp(-e^{-x})`.
    Gumbel,
    None,
}

impl Domain {
    /// Limit CDF at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Domain::Frechet(alpha) => {
                if x <= 0.0 {
                    0.0
                } else {
                    (-x.powf(-alpha)).exp()
                }
            }
            Domain::Gumbel => (-(-x).exp()).exp(),
            Domain::None => f64::NAN,
        }
    }

    /// Limit median: `(ln 2)^{-1/α}` or `-ln ln 2`.
    pub fn median(&self) -> f64 {
        let ln2 = std::f64::consts::LN_2;
        match *self {
            Domain::Frechet(alpha) => ln2.powf(-1.0 / alpha),
            Domain::Gumbel => -ln2.ln(),
            Domain::None => f64::NAN,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Frechet(a) => write!(f, "Frechet(alpha = {a:.4})"),
            Domain::Gumbel => write!(f, "Gumbel"),
            Domain::None => write!(f, "None"),
        }
    }
}

/// Domain on the default probe grid.
pub fn domain_of_attraction(d: &Distribution) -> (Domain, TailClass) {
    domain_of_attraction_on(d, &ClassifyOptions::default())
}

/// Classifies the survival function, with the reciprocal hazard as the
/// auxiliary hint when a hazard is available.
pub fn domain_of_attraction_on(d: &Distribution, opts: &ClassifyOptions) -> (Domain, TailClass) {
    let hint = HazardView::from_distribution(d).ok();
    let class = classify_tail(d.survival(), hint.as_ref().map(|h| h.g()), opts);
    let domain = match &class.variant {
        TailVariant::Regular { rho } if *rho < 0.0 => Domain::Frechet(-rho),
        TailVariant::Gamma { alpha, .. } if *alpha < 0.0 && self_neglect_passed(&class) => Domain::Gumbel,
        _ => Domain::None,
    };
    (domain, class)
}

fn self_neglect_passed(class: &TailClass) -> bool {
    class
        .evidence
        .iter()
        .any(|e| e.test == "self_neglect" && e.passed == Some(true))
}

/// `(a_n, b_n)`: Fréchet `(F̄^→(1/n), 0)`, Gumbel `(R(b_n), F̄^→(1/n))`.
pub fn normalizing_constants(d: &Distribution, domain: Domain, n: u64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let inv = generalized_inverse(d.survival(), Side::Right)?;
    let q = inv.eval(1.0 / n as f64)?;
    match domain {
        Domain::Frechet(_) => Ok((q, 0.0)),
        Domain::Gumbel => Ok((reciprocal_hazard_r(d, q)?, q)),
        Domain::None => Err(Error::Unsupported(format!("{} has no max-domain of attraction", d.label()))),
    }
}

/// `blocks` maxima of `n` draws each, mapped to `(M_n - b_n)/a_n`. Block `k`
/// uses its own ChaCha stream `k` under `seed`, so the output does not depend
/// on the thread count.
pub fn simulate_maxima(d: &Distribution, n: u64, blocks: usize, seed: u64, an: f64, bn: f64) -> Result<Vec<f64>> {
    let sampler = d.sampler().ok_or(Error::Missing("sampler"))?;
    if n == 0 || blocks == 0 {
        return Err(Error::InvalidArgument("n and blocks must be at least 1".into()));
    }
    if !(an > 0.0 && an.is_finite() && bn.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad normalization a = {an}, b = {bn}")));
    }
    Ok((0..blocks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            // The sampler is an inverse CDF, hence nondecreasing: the largest
            // draw comes from the largest uniform.
            let u = (0..n).map(|_| rng.random::<f64>()).fold(0.0, f64::max);
            (sampler(u) - bn) / an
        })
        .collect())
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `sample` and the
/// limit law.
pub fn ks_distance(sample: &[f64], domain: Domain) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    if domain == Domain::None {
        return Err(Error::Unsupported("no limit law".into()));
    }
    let mut xs = sample.to_vec();
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("sample contains NaN".into()));
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    Ok(xs.iter().enumerate().fold(0.0, |acc: f64, (i, &x)| {
        let c = domain.cdf(x);
        acc.max(((i + 1) as f64 / m - c).abs()).max((c - i as f64 / m).abs())
    }))
}

#[derive(Debug, Clone)]
pub struct EvtReport {
    pub domain: Domain,
    pub an: Vec<(u64, f64)>,
    pub bn: Vec<(u64, f64)>,
    pub ks: Vec<(u64, f64)>,
    pub seed: u64,
    pub blocks: usize,
    /// Normalized maxima per `n`.
    pub samples: Vec<(u64, Vec<f64>)>,
}

impl EvtReport {
    /// KS values decrease in `n` with at most one exception.
    pub fn trend_ok(&self) -> bool {
        let mut ks: Vec<_> = self.ks.clone();
        ks.sort_by_key(|p| p.0);
        ks.windows(2).filter(|w| w[1].1 > w[0].1).count() <= 1
    }

    pub fn ks_at(&self, n: u64) -> Option<f64> {
        self.ks.iter().find(|p| p.0 == n).map(|p| p.1)
    }

    /// Columns `n,blocks,a_n,b_n,ks,seed`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["n", "blocks", "a_n", "b_n", "ks", "seed"])?;
        for (i, &(n, a)) in self.an.iter().enumerate() {
            out.write_record([
                n.to_string(),
                self.blocks.to_string(),
                a.to_string(),
                self.bn[i].1.to_string(),
                self.ks[i].1.to_string(),
                self.seed.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Columns `n,block,value`.
    pub fn write_maxima_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["n", "block", "value"])?;
        for (n, xs) in &self.samples {
            for (k, x) in xs.iter().enumerate() {
                out.write_record([n.to_string(), k.to_string(), x.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Normalizing constants, simulated maxima and KS distance for each `n`.
pub fn evt_report(d: &Distribution, domain: Domain, ns: &[u64], blocks: usize, seed: u64) -> Result<EvtReport> {
    let mut report = EvtReport {
        domain,
        an: Vec::new(),
        bn: Vec::new(),
        ks: Vec::new(),
        seed,
        blocks,
        samples: Vec::new(),
    };
    for &n in ns {
        let (a, b) = normalizing_constants(d, domain, n)?;
        let xs = simulate_maxima(d, n, blocks, seed, a, b)?;
        report.ks.push((n, ks_distance(&xs, domain)?));
        report.an.push((n, a));
        report.bn.push((n, b));
        report.samples.push((n, xs));
    }
    Ok(report)
}
