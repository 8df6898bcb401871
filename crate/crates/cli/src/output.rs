use std::fs;
use std::path::Path;

use tailvar::classify::Evidence;
use tailvar::numlimit::{LimitEstimate, Verdict};

/// Compact number for the text report.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-3..1e6).contains(&a) {
        format!("{v:.6}")
    } else if v.is_finite() {
        format!("{v:.6e}")
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceRow {
    pub section: String,
    pub test: String,
    pub verdict: String,
    pub value: Option<f64>,
    pub residual: Option<f64>,
    pub detail: String,
}

impl EvidenceRow {
    pub fn from_evidence(section: &str, e: &Evidence) -> Self {
        let (value, residual, note) = match &e.estimate {
            Some(est) => (est.value(), est.residual.is_finite().then_some(est.residual), est.note.clone()),
            None => (None, None, None),
        };
        let detail = match (e.detail.is_empty(), note) {
            (false, Some(n)) => format!("{}; {n}", e.detail),
            (true, Some(n)) => n,
            _ => e.detail.clone(),
        };
        Self {
            section: section.into(),
            test: e.test.clone(),
            verdict: e.verdict_text(),
            value,
            residual,
            detail,
        }
    }

    pub fn from_limit(section: &str, test: impl Into<String>, e: &LimitEstimate) -> Self {
        Self {
            section: section.into(),
            test: test.into(),
            verdict: match e.verdict {
                Verdict::Finite(_) => "Finite".into(),
                v => v.to_string(),
            },
            value: e.value(),
            residual: e.residual.is_finite().then_some(e.residual),
            detail: e.note.clone().unwrap_or_default(),
        }
    }

    pub fn check(section: &str, test: impl Into<String>, passed: bool, value: Option<f64>, detail: impl Into<String>) -> Self {
        Self {
            section: section.into(),
            test: test.into(),
            verdict: if passed { "pass" } else { "fail" }.into(),
            value,
            residual: None,
            detail: detail.into(),
        }
    }
}

/// Everything a run writes.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub report: Vec<String>,
    pub evidence: Vec<EvidenceRow>,
    /// Extra CSV files: name and contents.
    pub files: Vec<(String, Vec<u8>)>,
    pub undetermined: bool,
}

impl Artifacts {
    pub fn line(&mut self, s: impl Into<String>) {
        self.report.push(s.into());
    }

    pub fn evidence_csv(&self) -> csv::Result<Vec<u8>> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        out.write_record(["section", "test", "verdict", "value", "residual", "detail"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.evidence {
            out.write_record([
                r.section.as_str(),
                &r.test,
                &r.verdict,
                &opt(r.value),
                &opt(r.residual),
                &r.detail,
            ])?;
        }
        out.into_inner().map_err(|e| e.into_error().into())
    }

    /// Fixed-width evidence table for `report.txt`.
    pub fn evidence_table(&self) -> Vec<String> {
        let rows: Vec<[String; 5]> = self
            .evidence
            .iter()
            .map(|r| {
                [
                    format!("{}.{}", r.section, r.test),
                    r.verdict.clone(),
                    r.value.map(num).unwrap_or_else(|| "-".into()),
                    r.residual.map(|x| format!("{x:.2e}")).unwrap_or_else(|| "-".into()),
                    r.detail.clone(),
                ]
            })
            .collect();
        let header = ["test", "verdict", "value", "residual", "detail"].map(String::from);
        let mut widths = header.clone().map(|h| h.len());
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        std::iter::once(&header)
            .chain(&rows)
            .map(|r| {
                let cells: Vec<String> = r[..4]
                    .iter()
                    .zip(&widths)
                    .map(|(c, &w)| format!("{c:<w$}"))
                    .collect();
                format!("{}  {}", cells.join("  "), r[4]).trim_end().to_string()
            })
            .collect()
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut text = self.report.join("\n");
        if !self.evidence.is_empty() {
            text.push_str("\n\nEvidence\n");
            text.push_str(&self.evidence_table().join("\n"));
        }
        text.push('\n');
        fs::write(dir.join("report.txt"), text)?;
        fs::write(dir.join("evidence.csv"), self.evidence_csv().map_err(std::io::Error::other)?)?;
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}
