use crate::config::RunConfig;
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::Path;
use toeplitz_spectra::eig::{EigOptions, BOUNDARY_GATE, DEFAULT_FILTER_EPS, STABILITY_GATE};
use toeplitz_spectra::lap::{LapOptions, MAX_CONDITION, POWER_ITERATIONS, POWER_TOL, RESIDUAL_TOL};
use toeplitz_spectra::mourre::MourreOptions;
use toeplitz_spectra::perturb::ZERO_FLOOR;
use toeplitz_spectra::scatter::{
    DecayOptions, CAUCHY_GATE, COMPLETENESS_GATE, DEFAULT_PROP_EPS, FRONT_GATE, INTERTWINING_DEGREE, OUTER_FRACTION,
};

/// Outcome of one report section.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Inconclusive { reason: String },
    Failed { module: String, operation: String, message: String },
    Skipped { reason: String },
}

impl Status {
    fn label(&self) -> String {
        match self {
            Status::Ok => "ok".into(),
            Status::Inconclusive { reason } => format!("inconclusive ({reason})"),
            Status::Failed {
                module,
                operation,
                message,
            } => format!("FAILED in {module}::{operation}: {message}"),
            Status::Skipped { reason } => format!("skipped ({reason})"),
        }
    }
}

/// Numeric failure tagged with the module operation that raised it.
#[derive(Debug)]
pub struct TaskError {
    pub module: &'static str,
    pub operation: &'static str,
    pub source: toeplitz_spectra::Error,
}

impl std::fmt::Display for TaskError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}::{}: {}", self.module, self.operation, self.source)
    }
}

pub trait At<T> {
    fn at(self, module: &'static str, operation: &'static str) -> Result<T, TaskError>;
}

impl<T> At<T> for toeplitz_spectra::Result<T> {
    fn at(self, module: &'static str, operation: &'static str) -> Result<T, TaskError> {
        self.map_err(|source| TaskError {
            module,
            operation,
            source,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Section {
    pub name: String,
    pub status: Status,
    pub text: String,
    pub data: Value,
    /// `(file name, contents)` written next to the report.
    pub files: Vec<(String, String)>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Section {
            name: name.into(),
            status: Status::Ok,
            text: String::new(),
            data: Value::Null,
            files: Vec::new(),
        }
    }

    pub fn failed(name: impl Into<String>, e: TaskError) -> Self {
        let mut s = Section::new(name);
        s.status = Status::Failed {
            module: e.module.into(),
            operation: e.operation.into(),
            message: e.source.to_string(),
        };
        s
    }

    pub fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        let mut s = Section::new(name);
        s.status = Status::Skipped { reason: reason.into() };
        s
    }

    pub fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    pub fn inconclusive(&mut self, reason: impl Into<String>) {
        if self.status == Status::Ok {
            self.status = Status::Inconclusive { reason: reason.into() };
        }
    }

    pub fn set_data<T: Serialize>(&mut self, v: &T) {
        self.data = serde_json::to_value(v).expect("report data serializes");
    }

    pub fn file(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }
}

/// Named tolerances of every module the run may touch.
pub fn tolerances(cfg: &RunConfig) -> Vec<(&'static str, String)> {
    let eig = EigOptions {
        seed: cfg.seed_value,
        ..EigOptions::default()
    };
    let lap = LapOptions::default();
    let mourre = MourreOptions::default();
    let decay = DecayOptions::default();
    vec![
        ("eig.residual_tol", format!("{:e}", eig.residual_tol)),
        ("eig.bisect_tol", format!("{:e}", eig.bisect_tol)),
        ("eig.cluster_tol", format!("{:e}", eig.cluster_tol)),
        ("eig.outer_fraction", format!("{}", eig.outer_fraction)),
        ("eig.max_eigs", format!("{}", eig.max_eigs)),
        ("eig.boundary_gate", format!("{BOUNDARY_GATE:e}")),
        ("eig.stability_gate", format!("{STABILITY_GATE:e}")),
        ("eig.filter_eps", format!("{DEFAULT_FILTER_EPS:e}")),
        ("mourre.degree", format!("{}", mourre.degree)),
        ("mourre.shoulder", format!("{}", mourre.shoulder)),
        ("mourre.defect_delta", format!("{}", mourre.defect_delta)),
        ("mourre.keep", format!("{}", mourre.keep)),
        ("mourre.filter_eps", format!("{:e}", mourre.filter_eps)),
        ("mourre.seed_half_length", format!("{}", mourre_seed(cfg))),
        ("lap.residual_tol", format!("{RESIDUAL_TOL:e}")),
        ("lap.power_iterations", format!("{POWER_ITERATIONS}")),
        ("lap.power_tol", format!("{POWER_TOL:e}")),
        ("lap.max_condition", format!("{MAX_CONDITION:e}")),
        ("lap.ratio_gate", format!("{}", lap.ratio_gate)),
        ("lap.agreement_gate", format!("{}", lap.agreement_gate)),
        ("lap.mu_floor", "max(1e-4, 20/sites)".into()),
        ("perturb.zero_floor", format!("{ZERO_FLOOR:e}")),
        ("perturb.k_max", format!("{}", cfg.kmax)),
        ("scatter.prop_eps", format!("{DEFAULT_PROP_EPS:e}")),
        ("scatter.outer_fraction", format!("{OUTER_FRACTION}")),
        ("scatter.front_gate", format!("{FRONT_GATE:e}")),
        ("scatter.intertwining_degree", format!("{INTERTWINING_DEGREE}")),
        ("scatter.cauchy_gate", format!("{CAUCHY_GATE:e}")),
        ("scatter.completeness_gate", format!("{COMPLETENESS_GATE:e}")),
        ("scatter.power_iterations", format!("{}", decay.power_iterations)),
        ("scatter.power_tol", format!("{:e}", decay.power_tol)),
        ("scatter.decay_filter_eps", format!("{:e}", decay.filter_eps)),
    ]
}

/// Seed half-length of the compressed commutator check.
pub fn mourre_seed(cfg: &RunConfig) -> usize {
    (cfg.half_length / 2).clamp(1, 256)
}

fn header(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "toeplitz-spectra {} report", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "task: {}", cfg.task.name());
    let _ = writeln!(s);
    let _ = writeln!(s, "[config]");
    if let Value::Object(m) = serde_json::to_value(cfg).expect("config serializes") {
        for (k, v) in m {
            let _ = writeln!(s, "{k} = {v}");
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "[tolerances]");
    for (k, v) in tolerances(cfg) {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

/// Writes `REPORT.txt`, `<task>.json` and every section file into `out`.
pub fn write(out: &Path, cfg: &RunConfig, sections: &[Section]) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    let mut text = header(cfg);
    for s in sections {
        let _ = writeln!(text);
        let _ = writeln!(text, "== {} ==", s.name);
        let _ = writeln!(text, "status: {}", s.status.label());
        text.push_str(&s.text);
    }
    std::fs::write(out.join("REPORT.txt"), text)?;

    let tol: serde_json::Map<String, Value> = tolerances(cfg)
        .into_iter()
        .map(|(k, v)| (k.to_string(), Value::String(v)))
        .collect();
    let doc = json!({
        "config": cfg,
        "tolerances": tol,
        "sections": sections
            .iter()
            .map(|s| json!({ "name": s.name, "status": s.status, "data": s.data }))
            .collect::<Vec<_>>(),
    });
    let body = serde_json::to_string_pretty(&doc).expect("report serializes");
    std::fs::write(out.join(format!("{}.json", cfg.task.name())), body + "\n")?;
    for s in sections {
        for (name, contents) in &s.files {
            std::fs::write(out.join(name), contents)?;
        }
    }
    Ok(())
}

/// CSV text from a header and rows of numbers.
pub fn csv(head: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = head.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|x| format!("{x:.17e}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

/// `[a, b] U [c, d]` style rendering.
pub fn intervals(iv: &[(f64, f64)]) -> String {
    if iv.is_empty() {
        return "{}".into();
    }
    iv.iter()
        .map(|(a, b)| format!("[{}, {}]", num(*a), num(*b)))
        .collect::<Vec<_>>()
        .join(" U ")
}

/// Fixed rendering: ten significant decimals, with `-0` folded to `0`.
pub fn num(x: f64) -> String {
    let r = format!("{x:.10}");
    let t = r.trim_end_matches('0').trim_end_matches('.').to_string();
    if t == "-0" {
        "0".into()
    } else {
        t
    }
}
