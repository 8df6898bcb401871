use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use tailvar::classify::ClassifyOptions;
use tailvar::inverses::PiOptions;
use tailvar::numlimit::{LimitOptions, ProbeGrid};
use tailvar::represent::RepresentOptions;
use tailvar::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Tail class with evidence table
    Classify,
    /// Karamata or Γ representation of the classified function
    Represent,
    /// Generalized inverse, its index and the Π functional
    Invert,
    /// Domain of attraction and block-maxima simulation
    Evt,
    /// Everything the subject supports
    Report,
}

/// Classify a tail, decompose it, invert it and check its extreme-value limit.
#[derive(Debug, Clone, Parser)]
#[command(name = "tailvar", version, allow_negative_numbers = true)]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// Distribution spec file (`key = value` lines)
    pub spec_path: PathBuf,
    /// First probe point of the geometric grid
    #[arg(long)]
    pub grid_start: Option<f64>,
    /// Ratio between consecutive probes
    #[arg(long)]
    pub grid_ratio: Option<f64>,
    /// Number of probes (at least 8)
    #[arg(long)]
    pub grid_count: Option<usize>,
    /// Residual threshold for finite limit verdicts
    #[arg(long)]
    pub tol: Option<f64>,
    /// Multiplicative probes x > 0, comma separated; Γ shifts use ±x
    #[arg(long, value_delimiter = ',')]
    pub xs: Option<Vec<f64>>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Block maxima per sample size
    #[arg(long, default_value_t = 2000)]
    pub blocks: usize,
    /// Sample sizes per block, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [100u64, 1000, 10000])]
    pub n: Vec<u64>,
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Numerical options after overrides.
#[derive(Debug, Clone)]
pub struct Settings {
    pub classify: ClassifyOptions,
    pub represent: RepresentOptions,
    pub pi: PiOptions,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if let Some(s) = self.grid_start {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("--grid-start must be > 0, got {s}"));
            }
        }
        if let Some(r) = self.grid_ratio {
            if !(r > 1.0 && r.is_finite()) {
                return bad(format!("--grid-ratio must be > 1, got {r}"));
            }
        }
        if let Some(k) = self.grid_count {
            if k < ProbeGrid::MIN_COUNT {
                return bad(format!("--grid-count must be >= {}, got {k}", ProbeGrid::MIN_COUNT));
            }
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("--tol must be > 0, got {t}"));
            }
        }
        if let Some(xs) = &self.xs {
            if xs.is_empty() || xs.iter().any(|&x| !(x > 0.0 && x.is_finite()) || x == 1.0) {
                return bad("--xs needs positive values other than 1".into());
            }
        }
        if self.blocks == 0 {
            return bad("--blocks must be at least 1".into());
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return bad("--n values must be at least 1".into());
        }
        Ok(())
    }

    fn has_grid_override(&self) -> bool {
        self.grid_start.is_some() || self.grid_ratio.is_some() || self.grid_count.is_some()
    }

    /// Options for a subject whose preferred grid is `base`.
    pub fn settings(&self, base: ProbeGrid) -> Result<Settings> {
        let grid = if self.has_grid_override() {
            ProbeGrid::new(
                self.grid_start.unwrap_or(base.start()),
                self.grid_ratio.unwrap_or(base.ratio()),
                self.grid_count.unwrap_or(base.count()),
            )?
        } else {
            base
        };
        let limit = self.tol.map_or_else(LimitOptions::default, LimitOptions::with_tol);
        let mut classify = ClassifyOptions::with_grid(grid);
        classify.limit = limit;
        let mut pi = PiOptions {
            limit,
            ..PiOptions::default()
        };
        if let Some(xs) = &self.xs {
            classify.rv_xs = xs.clone();
            classify.dehaan_xs = xs.clone();
            let mut shifts: Vec<f64> = xs.iter().flat_map(|&x| [-x, x]).collect();
            shifts.sort_by(f64::total_cmp);
            shifts.dedup();
            classify.gamma_xs = shifts;
            pi.xs = xs.clone();
        }
        let represent = RepresentOptions {
            grid,
            limit,
            ..RepresentOptions::default()
        };
        Ok(Settings { classify, represent, pi })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunConfig {
        RunConfig::try_parse_from(std::iter::once("tailvar").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn defaults() {
        let c = parse(&["evt", "spec.txt"]);
        assert_eq!(c.command, Command::Evt);
        assert_eq!(c.n, vec![100, 1000, 10000]);
        assert_eq!((c.seed, c.blocks), (7, 2000));
        c.validate().unwrap();
    }

    #[test]
    fn overrides_are_validated() {
        for args in [
            &["classify", "s", "--grid-start", "0"][..],
            &["classify", "s", "--grid-ratio", "1"],
            &["classify", "s", "--grid-count", "7"],
            &["classify", "s", "--tol", "-1"],
            &["classify", "s", "--xs", "2,1"],
            &["evt", "s", "--blocks", "0"],
            &["evt", "s", "--n", "0"],
        ] {
            assert!(parse(args).validate().is_err(), "{args:?}");
        }
    }

    #[test]
    fn grid_override_keeps_other_fields() {
        let c = parse(&["classify", "s", "--grid-count", "20", "--xs", "2,3"]);
        let s = c.settings(ProbeGrid::default()).unwrap();
        assert_eq!(s.classify.grid.count(), 20);
        assert_eq!(s.classify.grid.start(), 8.0);
        assert_eq!(s.classify.gamma_xs, vec![-3.0, -2.0, 2.0, 3.0]);
        assert_eq!(s.pi.xs, vec![2.0, 3.0]);
    }
}
