use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::solver::{Count, EvalCounters, RunReport};

use super::profile::CostMatrix;
use super::{HarnessError, SuiteReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Text,
}

impl FromStr for ReportFormat {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "text" | "text-table" => Ok(ReportFormat::Text),
            _ => Err(HarnessError::Config(format!("unknown report format `{s}`"))),
        }
    }
}

/// One line of `runs.csv`. Per-format counts are encoded as
/// `name=total/successful` separated by `;`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub solver: String,
    pub problem: String,
    pub n: usize,
    pub status: String,
    pub iterations: usize,
    pub successful: usize,
    pub f: Option<f64>,
    pub gnorm: Option<f64>,
    pub objective_evals: u64,
    pub gradient_evals: u64,
    pub objective_time: f64,
    pub objective_energy: f64,
    pub gradient_time: f64,
    pub gradient_energy: f64,
    pub objective_by_format: String,
    pub gradient_by_format: String,
}

fn by_format(c: &EvalCounters, counts: &[Count]) -> String {
    c.formats
        .iter()
        .zip(counts)
        .map(|(f, n)| format!("{f}={}/{}", n.total, n.success))
        .collect::<Vec<_>>()
        .join(";")
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl RunRow {
    pub fn new(solver: &str, r: &RunReport) -> Self {
        let c = &r.counters;
        Self {
            solver: solver.to_string(),
            problem: r.problem.clone(),
            n: r.n,
            status: r.status.to_string(),
            iterations: r.iterations,
            successful: r.successful,
            f: finite(r.f),
            gnorm: finite(r.gnorm),
            objective_evals: c.objective.iter().map(|n| n.total).sum(),
            gradient_evals: c.gradient.iter().map(|n| n.total).sum(),
            objective_time: r.effort.objective_time,
            objective_energy: r.effort.objective_energy,
            gradient_time: r.effort.gradient_time,
            gradient_energy: r.effort.gradient_energy,
            objective_by_format: by_format(c, &c.objective),
            gradient_by_format: by_format(c, &c.gradient),
        }
    }

    pub fn solved(&self) -> bool {
        self.status == "first_order"
    }

    /// Time-weighted evaluation effort.
    pub fn cost(&self) -> f64 {
        self.objective_time + self.gradient_time
    }
}

const RUN_HEADER: [&str; 16] = [
    "solver",
    "problem",
    "n",
    "status",
    "iterations",
    "successful",
    "f",
    "gnorm",
    "objective_evals",
    "gradient_evals",
    "objective_time",
    "objective_energy",
    "gradient_time",
    "gradient_energy",
    "objective_by_format",
    "gradient_by_format",
];

fn write_runs_csv(report: &SuiteReport, path: &Path) -> Result<(), HarnessError> {
    let mut wr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    wr.write_record(RUN_HEADER)?;
    for s in &report.solvers {
        for r in &s.runs {
            wr.serialize(RunRow::new(&s.label, r))?;
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRow>, HarnessError> {
    let mut rd = csv::Reader::from_path(path)?;
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != RUN_HEADER {
        return Err(HarnessError::Malformed(format!(
            "unexpected header in {}",
            path.display()
        )));
    }
    let rows = rd.deserialize().collect::<Result<Vec<RunRow>, _>>()?;
    Ok(rows)
}

/// Effort per (problem, solver); unsolved runs cost `+inf`.
pub fn cost_matrix_from_runs_csv(path: &Path) -> Result<CostMatrix, HarnessError> {
    let rows = read_runs_csv(path)?;
    let mut solvers: Vec<String> = Vec::new();
    let mut problems: Vec<String> = Vec::new();
    let mut cost: BTreeMap<(String, String), f64> = BTreeMap::new();
    for r in &rows {
        if !solvers.contains(&r.solver) {
            solvers.push(r.solver.clone());
        }
        let key = format!("{}/{}", r.problem, r.n);
        if !problems.contains(&key) {
            problems.push(key.clone());
        }
        let c = if r.solved() { r.cost() } else { f64::INFINITY };
        cost.insert((key, r.solver.clone()), c);
    }
    let costs = problems
        .iter()
        .map(|p| {
            solvers
                .iter()
                .map(|s| {
                    cost.get(&(p.clone(), s.clone()))
                        .copied()
                        .unwrap_or(f64::INFINITY)
                })
                .collect()
        })
        .collect();
    Ok(CostMatrix {
        solvers,
        problems,
        costs,
    })
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    summaries: &'a [super::SolverSummary],
}

/// Text tables: status counts with per-format evaluation shares, and effort
/// ratios against the baseline.
pub fn render_tables(report: &SuiteReport) -> String {
    let mut out = String::new();
    let mut formats: Vec<(u32, String)> = report
        .summaries
        .iter()
        .flat_map(|s| {
            s.gradient
                .iter()
                .chain(&s.objective)
                .map(|f| (f.bits, f.format.clone()))
        })
        .collect();
    formats.sort();
    formats.dedup();
    let formats: Vec<String> = formats.into_iter().map(|(_, f)| f).collect();
    let _ = write!(
        out,
        "{:<24} {:>4} {:>4} {:>4} {:>4}",
        "solver", "FO", "MI", "F", "ST"
    );
    for kind in ["obj", "grad"] {
        for f in &formats {
            let _ = write!(out, " {:>18}", format!("{kind} {f} % (ok %)"));
        }
    }
    out.push('\n');
    for s in &report.summaries {
        let st = &s.statuses;
        let _ = write!(
            out,
            "{:<24} {:>4} {:>4} {:>4} {:>4}",
            s.label, st.first_order, st.max_iter, st.precision_failure, st.stalled
        );
        for shares in [&s.objective, &s.gradient] {
            for f in &formats {
                let cell = match shares.iter().find(|x| &x.format == f) {
                    Some(x) => format!("{:.1} ({:.1})", x.percent, x.success_percent),
                    None => "-".to_string(),
                };
                let _ = write!(out, " {cell:>18}");
            }
        }
        out.push('\n');
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<24} {:>8} {:>10} {:>10} {:>10} {:>10}",
        "solver", "solved", "obj time", "obj energy", "grad time", "grad energy"
    );
    for s in &report.summaries {
        match &s.versus_baseline {
            Some(c) => {
                let r = &c.ratios;
                let _ = writeln!(
                    out,
                    "{:<24} {:>8} {:>10.3} {:>10.3} {:>10.3} {:>10.3}",
                    s.label,
                    c.common_solved,
                    r.objective_time,
                    r.objective_energy,
                    r.gradient_time,
                    r.gradient_energy
                );
            }
            None => {
                let _ = writeln!(out, "{:<24} {:>8}", s.label, "-");
            }
        }
    }
    out
}

/// Write `runs.csv`, `summary.json` and `tables.txt` (as selected) into
/// `dir`.
pub fn emit_report(
    report: &SuiteReport,
    dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for f in formats {
        let path = match f {
            ReportFormat::Csv => {
                let p = dir.join("runs.csv");
                write_runs_csv(report, &p)?;
                p
            }
            ReportFormat::Json => {
                let p = dir.join("summary.json");
                let body = serde_json::to_string_pretty(&SummaryFile {
                    summaries: &report.summaries,
                })?;
                fs::write(&p, body)?;
                p
            }
            ReportFormat::Text => {
                let p = dir.join("tables.txt");
                fs::write(&p, render_tables(report))?;
                p
            }
        };
        written.push(path);
    }
    Ok(written)
}
