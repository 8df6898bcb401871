//! Line-oriented distribution spec files.
//!
//! ```text
//! # comment
//! family = pareto
//! params = alpha:2
//! ```
//!
//! Keys: `family` (a catalog family or `expr`), `params` (comma-separated
//! `name:value`), `t0`, `expr` (for `family = expr`) and `target`
//! (`survival` or `density`, catalog families only).

use crate::error::{Error, Result};
use crate::funcmodel::catalog::{by_name, CatalogEntry};
use crate::funcmodel::expr::Expr;
use crate::funcmodel::TailFunction;

const KEYS: [&str; 5] = ["family", "params", "t0", "expr", "target"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Survival,
    Density,
}

#[derive(Debug, Clone)]
pub struct SpecFile {
    pub family: String,
    pub params: Vec<(String, f64)>,
    pub t0: Option<f64>,
    pub expr: Option<Expr>,
    pub target: Target,
}

/// What a spec file describes.
#[derive(Debug, Clone)]
pub enum Subject {
    Catalog { entry: Box<CatalogEntry>, function: TailFunction },
    Expression(TailFunction),
}

impl Subject {
    /// The function to analyze.
    pub fn function(&self) -> &TailFunction {
        match self {
            Subject::Catalog { function, .. } => function,
            Subject::Expression(f) => f,
        }
    }

    pub fn entry(&self) -> Option<&CatalogEntry> {
        match self {
            Subject::Catalog { entry, .. } => Some(entry),
            Subject::Expression(_) => None,
        }
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

impl SpecFile {
    pub fn parse(src: &str) -> Result<SpecFile> {
        let mut family = None;
        let mut params = None;
        let mut t0 = None;
        let mut expr = None;
        let mut target = None;
        let mut seen: Vec<&str> = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let line = i + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let (key, value) = text
                .split_once('=')
                .ok_or_else(|| parse_error(line, format!("expected 'key = value', got '{text}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let known = KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| parse_error(line, format!("unknown key '{key}'")))?;
            if seen.contains(known) {
                return Err(parse_error(line, format!("duplicate key '{key}'")));
            }
            seen.push(known);
            match key {
                "family" => {
                    if value.is_empty() {
                        return Err(parse_error(line, "empty family"));
                    }
                    family = Some((line, value.to_ascii_lowercase()));
                }
                "params" => params = Some(parse_params(value).map_err(|m| parse_error(line, m))?),
                "t0" => {
                    let v: f64 = value
                        .parse()
                        .map_err(|_| parse_error(line, format!("t0 is not a number: '{value}'")))?;
                    if !v.is_finite() {
                        return Err(parse_error(line, "t0 must be finite"));
                    }
                    t0 = Some(v);
                }
                "expr" => {
                    expr = Some((line, Expr::parse(value).map_err(|e| parse_error(line, e.to_string()))?));
                }
                _ => {
                    target = Some((
                        line,
                        match value {
                            "survival" => Target::Survival,
                            "density" => Target::Density,
                            _ => return Err(parse_error(line, format!("target must be survival or density, got '{value}'"))),
                        },
                    ))
                }
            }
        }
        let last = src.lines().count().max(1);
        let (fline, family) = family.ok_or_else(|| parse_error(last, "missing key 'family'"))?;
        let is_expr = family == "expr";
        match (&expr, is_expr) {
            (None, true) => return Err(parse_error(fline, "family expr needs an 'expr' line")),
            (Some((l, _)), false) => return Err(parse_error(*l, format!("'expr' is only valid with family = expr"))),
            _ => {}
        }
        if is_expr {
            if let Some((l, _)) = target {
                return Err(parse_error(l, "'target' is only valid for catalog families"));
            }
        }
        Ok(SpecFile {
            family,
            params: params.unwrap_or_default(),
            t0,
            expr: expr.map(|e| e.1),
            target: target.map_or(Target::Survival, |t| t.1),
        })
    }

    /// Builds the catalog entry or expression function.
    pub fn build(&self) -> Result<Subject> {
        if let Some(e) = &self.expr {
            let f = e.clone().into_tail_function(e.to_string(), self.t0.unwrap_or(1.0))?;
            return Ok(Subject::Expression(f));
        }
        let entry = by_name(&self.family, &self.params)?;
        let base = match self.target {
            Target::Survival => entry.survival().clone(),
            Target::Density => entry
                .distribution
                .density()
                .cloned()
                .ok_or(Error::Missing("density"))?,
        };
        let function = match self.t0 {
            Some(t0) if t0 < base.t0() => {
                return Err(Error::InvalidArgument(format!(
                    "t0 = {t0} is below the family's lower bound {}",
                    base.t0()
                )))
            }
            Some(t0) => {
                base.ln_eval(t0)?;
                base.with_t0(t0)
            }
            None => base,
        };
        Ok(Subject::Catalog {
            entry: Box::new(entry),
            function,
        })
    }
}

fn parse_params(value: &str) -> std::result::Result<Vec<(String, f64)>, String> {
    let mut out: Vec<(String, f64)> = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once(':')
            .ok_or_else(|| format!("parameter '{part}' is not name:value"))?;
        let k = k.trim().to_string();
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| format!("parameter {k} is not a number: '{}'", v.trim()))?;
        if out.iter().any(|(n, _)| *n == k) {
            return Err(format!("parameter {k} given twice"));
        }
        out.push((k, v));
    }
    Ok(out)
}
