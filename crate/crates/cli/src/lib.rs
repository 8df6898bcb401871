//! Front end for the `tailvar` binary.

pub mod config;
pub mod output;

use std::fmt;
use std::fs;

use tailvar::classify::{classify_tail, TailClass, TailVariant};
use tailvar::evt::{domain_of_attraction_on, evt_report, Domain};
use tailvar::funcmodel::specfile::{SpecFile, Subject, Target};
use tailvar::funcmodel::TailFunction;
use tailvar::hazard::HazardView;
use tailvar::inverses::{generalized_inverse_on, inverse_index_check, pi_functional, Side};
use tailvar::numlimit::ProbeGrid;
use tailvar::represent::{gamma_decompose, karamata_decompose, RepresentationKind};
use tailvar::Error;

pub use config::{Command, RunConfig, Settings};
use output::{num, Artifacts, EvidenceRow};

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNDETERMINED: i32 = 2;

/// An error tagged with the operation that raised it.
#[derive(Debug)]
pub struct Failure {
    pub op: &'static str,
    pub error: Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.op, self.error)
    }
}

impl std::error::Error for Failure {}

trait Op<T> {
    fn op(self, op: &'static str) -> Result<T, Failure>;
}

impl<T, E: Into<Error>> Op<T> for Result<T, E> {
    fn op(self, op: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure { op, error: e.into() })
    }
}

/// Parsed spec plus the function under study.
struct Job {
    spec: SpecFile,
    subject: Subject,
    settings: Settings,
}

impl Job {
    fn function(&self) -> &TailFunction {
        self.subject.function()
    }

    /// Reciprocal hazard of a catalog survival, used as the Γ hint.
    fn hazard_hint(&self) -> Option<TailFunction> {
        match (&self.subject, self.spec.target) {
            (Subject::Catalog { entry, .. }, Target::Survival) => HazardView::from_distribution(&entry.distribution)
                .ok()
                .map(|h| h.g().clone()),
            _ => None,
        }
    }

    fn origin(&self) -> f64 {
        self.function().t0().max(1.0)
    }
}

fn load(config: &RunConfig) -> Result<Job, Failure> {
    config.validate().op("arguments")?;
    let text = fs::read_to_string(&config.spec_path).op("reading spec file")?;
    let spec = SpecFile::parse(&text).op("parsing spec file")?;
    let subject = spec.build().op("building subject")?;
    let mut base = subject.entry().map_or_else(ProbeGrid::default, |e| e.grid());
    let t0 = subject.function().t0();
    if t0 >= base.start() {
        base = base.starting_at(2.0 * t0).op("probe grid")?;
    }
    let settings = config.settings(base).op("probe grid")?;
    Ok(Job { spec, subject, settings })
}

fn classify(job: &Job, out: &mut Artifacts) -> TailClass {
    let hint = job.hazard_hint();
    let class = classify_tail(job.function(), hint.as_ref(), &job.settings.classify);
    out.line(format!("verdict: {}", class.summary()));
    if let Some(i) = class.index() {
        out.line(format!("index: {}", num(i)));
    }
    for e in &class.evidence {
        out.evidence.push(EvidenceRow::from_evidence("classify", e));
    }
    if class.is_undetermined() {
        out.undetermined = true;
    }
    class
}

fn represent(job: &Job, class: &TailClass, out: &mut Artifacts) -> Result<(), Failure> {
    let f = job.function();
    let opts = &job.settings.represent;
    let report = match &class.variant {
        TailVariant::Slow => karamata_decompose(f, 0.0, job.origin(), opts).op("karamata_decompose")?,
        TailVariant::Regular { rho } => karamata_decompose(f, *rho, job.origin(), opts).op("karamata_decompose")?,
        TailVariant::Gamma { alpha, g, .. } => {
            gamma_decompose(f, *alpha, g, job.origin().max(g.t0()), opts).op("gamma_decompose")?
        }
        other => {
            out.line(format!("representation: none for {}", class.summary()));
            if matches!(other, TailVariant::Undetermined) {
                out.undetermined = true;
            }
            return Ok(());
        }
    };
    let kind = match report.kind {
        RepresentationKind::KaramataRV => "Karamata",
        RepresentationKind::GammaOmey => "Gamma",
    };
    out.line(format!("representation: {kind}, index = {}, t0 = {}", num(report.index), num(report.t0)));
    out.line(format!("calibration residual: {:.3e}", report.calibration_residual));
    out.line(format!("validation residual: {:.3e}", report.residual));
    out.line(format!("final trend: {:.3e}", report.final_trend()));
    out.evidence.push(EvidenceRow::from_limit("represent", "trend", &report.trend));
    out.evidence.push(EvidenceRow::check(
        "represent",
        "trend_halves",
        report.trend_halves(),
        Some(report.final_trend()),
        "",
    ));
    if let Some(c) = &report.c_limit {
        out.evidence.push(EvidenceRow::from_limit("represent", "c_limit", c));
    }
    if report.fallback_panels > 0 {
        out.line(format!("panels using the log-difference fallback: {}", report.fallback_panels));
    }
    let mut buf = Vec::new();
    report.write_csv(&mut buf).op("writing representation.csv")?;
    out.files.push(("representation.csv".into(), buf));
    Ok(())
}

fn invert(job: &Job, class: &TailClass, out: &mut Artifacts) -> Result<(), Failure> {
    let f = job.function();
    let grid = job.settings.classify.grid;
    let pts: Vec<f64> = grid.points().into_iter().filter(|&t| t >= f.t0()).collect();
    let decreasing = match (pts.first(), pts.last()) {
        (Some(&a), Some(&b)) => f.ln_eval_extended(b).op("invert")? < f.ln_eval_extended(a).op("invert")?,
        _ => return Err(Failure {
            op: "invert",
            error: Error::InvalidArgument("probe grid lies below t0".into()),
        }),
    };
    let side = if decreasing { Side::Right } else { Side::Left };
    let inv = generalized_inverse_on(f, side, grid).op("generalized_inverse")?;
    out.line(format!(
        "inverse: {} ({})",
        if decreasing { "right, f^->(y) = inf{t : f(t) <= y}" } else { "left, f^<-(y) = inf{t : f(t) >= y}" },
        f.label()
    ));

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["t", "ln_f", "inverse", "relative_error"]).op("writing inverse.csv")?;
    let mut worst: f64 = 0.0;
    for &t in &pts {
        let Ok(lf) = f.ln_eval(t) else { continue };
        let x = inv.eval_log(lf).op("generalized_inverse")?;
        let err = (x - t).abs() / t;
        worst = worst.max(err);
        w.write_record([t.to_string(), lf.to_string(), x.to_string(), err.to_string()])
            .op("writing inverse.csv")?;
    }
    out.files.push(("inverse.csv".into(), w.into_inner().map_err(|e| e.into_error()).op("writing inverse.csv")?));
    out.line(format!("round trip: largest relative error {worst:.3e}"));

    match &class.variant {
        TailVariant::Regular { rho } => {
            let e = inverse_index_check(f, *rho, grid, &job.settings.classify.limit).op("inverse_index_check")?;
            out.line(format!("inverse index: {} (expected {})", e.verdict, num(1.0 / rho.abs())));
            out.evidence.push(EvidenceRow::from_limit("invert", "inverse_index", &e));
        }
        TailVariant::Gamma { g, .. } => {
            let pi = pi_functional(f, job.origin().max(g.t0()), Some(g), &job.settings.pi).op("pi_functional")?;
            out.line(format!("Pi functional ({:?} route): {}", pi.route, if pi.passed { "pass" } else { "fail" }));
            for (x, e) in &pi.pi_limits {
                out.evidence.push(EvidenceRow::from_limit("invert", format!("pi(x={x}, target={:.6})", pi.target(*x)), e));
            }
            out.evidence.push(EvidenceRow::check("invert", "pi_functional", pi.passed, None, format!("{:?} route", pi.route)));
        }
        TailVariant::Undetermined => out.undetermined = true,
        _ => {}
    }
    Ok(())
}

fn evt(job: &Job, config: &RunConfig, out: &mut Artifacts) -> Result<(), Failure> {
    let entry = match (&job.subject, job.spec.target) {
        (Subject::Catalog { entry, .. }, Target::Survival) => entry,
        _ => {
            return Err(Failure {
                op: "evt",
                error: Error::Unsupported("evt needs a catalog distribution with target = survival".into()),
            })
        }
    };
    let d = &entry.distribution;
    let (domain, class) = domain_of_attraction_on(d, &job.settings.classify);
    out.line(format!("classification: {}", class.summary()));
    out.line(format!("domain of attraction: {domain}"));
    for e in &class.evidence {
        out.evidence.push(EvidenceRow::from_evidence("evt.classify", e));
    }
    if domain == Domain::None {
        if class.is_undetermined() {
            out.undetermined = true;
        }
        out.line("no simulation: the tail has no Frechet or Gumbel limit".to_string());
        return Ok(());
    }
    let r = evt_report(d, domain, &config.n, config.blocks, config.seed).op("evt")?;
    out.line(format!("seed = {}, blocks = {}", r.seed, r.blocks));
    for (i, &(n, ks)) in r.ks.iter().enumerate() {
        out.line(format!(
            "n = {n}: a_n = {}, b_n = {}, ks = {ks:.4}",
            num(r.an[i].1),
            num(r.bn[i].1)
        ));
        out.evidence.push(EvidenceRow {
            section: "evt".into(),
            test: format!("ks(n={n})"),
            verdict: "-".into(),
            value: Some(ks),
            residual: None,
            detail: String::new(),
        });
    }
    if r.ks.len() > 1 {
        let ok = r.trend_ok();
        out.line(format!("ks trend (at most one increase): {}", if ok { "pass" } else { "fail" }));
        out.evidence.push(EvidenceRow::check("evt", "ks_trend", ok, None, ""));
    }
    let mut buf = Vec::new();
    r.write_csv(&mut buf).op("writing evt.csv")?;
    out.files.push(("evt.csv".into(), buf));
    let mut buf = Vec::new();
    r.write_maxima_csv(&mut buf).op("writing maxima.csv")?;
    out.files.push(("maxima.csv".into(), buf));
    Ok(())
}

/// Runs one command and returns the artifacts without touching the disk.
pub fn execute(config: &RunConfig) -> Result<Artifacts, Failure> {
    let job = load(config)?;
    let mut out = Artifacts::default();
    out.line(format!("subject: {}", job.function().label()));
    if let Some(e) = job.subject.entry() {
        out.line(format!("family: {}", e.name));
    }
    out.line(format!("command: {:?}", config.command).to_lowercase());
    let g = job.settings.classify.grid;
    out.line(format!("grid: start {}, ratio {}, count {}", num(g.start()), num(g.ratio()), g.count()));
    match config.command {
        Command::Classify => {
            classify(&job, &mut out);
        }
        Command::Represent => {
            let class = classify(&job, &mut out);
            represent(&job, &class, &mut out)?;
        }
        Command::Invert => {
            let class = classify(&job, &mut out);
            invert(&job, &class, &mut out)?;
        }
        Command::Evt => evt(&job, config, &mut out)?,
        Command::Report => {
            let class = classify(&job, &mut out);
            represent(&job, &class, &mut out)?;
            invert(&job, &class, &mut out)?;
            let simulable = job.subject.entry().is_some_and(|e| e.distribution.sampler().is_some())
                && job.spec.target == Target::Survival;
            if simulable {
                evt(&job, config, &mut out)?;
            } else {
                out.line("evt: skipped (no sampler)");
            }
        }
    }
    Ok(out)
}

/// Runs `config`, writes the outputs and returns the exit code.
pub fn run(config: &RunConfig) -> i32 {
    match execute(config) {
        Ok(out) => {
            if let Err(e) = out.write_to(&config.out) {
                eprintln!("error: writing outputs: {e}");
                return EXIT_ERROR;
            }
            if out.undetermined {
                EXIT_UNDETERMINED
            } else {
                EXIT_OK
            }
        }
        Err(f) => {
            eprintln!("error: {f}");
            EXIT_ERROR
        }
    }
}
