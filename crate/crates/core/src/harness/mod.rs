//! Suite runs, format-usage statistics, effort ratios and performance
//! profiles.

mod config_file;
mod profile;
mod report;

pub use config_file::{apply_setting, parse_config, parse_formats};
pub use profile::{
    performance_profile, read_profile_csv, tau_grid, write_profile_csv, CostMatrix, ProfileData,
};
pub use report::{
    cost_matrix_from_runs_csv, emit_report, read_runs_csv, render_tables, ReportFormat, RunRow,
};

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problems::Problem;
use crate::solver::{solve, EvalCounters, EvalKind, RunReport, SolverConfig, SolverMode, Status};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no problem was solved by both solvers")]
    EmptyIntersection,
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed input: {0}")]
    Malformed(String),
}

/// Relative cost of one evaluation by format width, double = 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EffortModel;

impl EffortModel {
    pub fn time_weight(&self, bits: u32) -> f64 {
        bits as f64 / 64.0
    }

    pub fn energy_weight(&self, bits: u32) -> f64 {
        let t = self.time_weight(bits);
        t * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffortRatios {
    pub objective_time: f64,
    pub objective_energy: f64,
    pub gradient_time: f64,
    pub gradient_energy: f64,
}

fn weighted(c: &EvalCounters, kind: EvalKind, w: impl Fn(u32) -> f64) -> f64 {
    c.get(kind)
        .iter()
        .zip(&c.bits)
        .map(|(n, &b)| n.total as f64 * w(b))
        .sum()
}

/// Weighted evaluation cost of `mp` over that of `baseline`.
pub fn effort_ratios(
    mp: &EvalCounters,
    baseline: &EvalCounters,
    model: &EffortModel,
) -> Result<EffortRatios, HarnessError> {
    let ratio = |kind, w: &dyn Fn(u32) -> f64| {
        let den = weighted(baseline, kind, w);
        if den == 0.0 {
            Err(HarnessError::EmptyIntersection)
        } else {
            Ok(weighted(mp, kind, w) / den)
        }
    };
    let t = |b| model.time_weight(b);
    let e = |b| model.energy_weight(b);
    Ok(EffortRatios {
        objective_time: ratio(EvalKind::Objective, &t)?,
        objective_energy: ratio(EvalKind::Objective, &e)?,
        gradient_time: ratio(EvalKind::Gradient, &t)?,
        gradient_energy: ratio(EvalKind::Gradient, &e)?,
    })
}

/// Effort ratios restricted to problems both solvers solved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub solver: String,
    pub baseline: String,
    pub common_solved: usize,
    pub ratios: EffortRatios,
}

pub fn compare(
    solver: &str,
    runs: &[RunReport],
    baseline: &str,
    base_runs: &[RunReport],
    model: &EffortModel,
) -> Result<Comparison, HarnessError> {
    let solved = |rs: &[RunReport]| -> BTreeSet<(String, usize)> {
        rs.iter()
            .filter(|r| r.solved())
            .map(|r| (r.problem.clone(), r.n))
            .collect()
    };
    let common: BTreeSet<_> = solved(runs)
        .intersection(&solved(base_runs))
        .cloned()
        .collect();
    if common.is_empty() {
        return Err(HarnessError::EmptyIntersection);
    }
    let total = |rs: &[RunReport]| {
        let mut acc: Option<EvalCounters> = None;
        for r in rs
            .iter()
            .filter(|r| common.contains(&(r.problem.clone(), r.n)))
        {
            match &mut acc {
                Some(a) => a.merge(&r.counters),
                None => acc = Some(r.counters.clone()),
            }
        }
        acc.expect("nonempty intersection")
    };
    Ok(Comparison {
        solver: solver.to_string(),
        baseline: baseline.to_string(),
        common_solved: common.len(),
        ratios: effort_ratios(&total(runs), &total(base_runs), model)?,
    })
}

/// A named solver configuration of a suite run.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverSpec {
    pub label: String,
    pub cfg: SolverConfig,
}

impl SolverSpec {
    /// Parse `r2`, `guaranteed`, `relaxed`, `relaxed:<a>` or `exact` (the
    /// long `mpr2_*` names are accepted too) on top of `base`.
    pub fn parse(s: &str, base: &SolverConfig) -> Result<Self, HarnessError> {
        let (name, a) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let mode = SolverMode::from_str(name).map_err(|e| HarnessError::Config(e.to_string()))?;
        let mut cfg = base.clone();
        cfg.mode = mode;
        let mut label = mode.as_str().to_string();
        if let Some(a) = a {
            if mode != SolverMode::Relaxed {
                return Err(HarnessError::Config(format!(
                    "relaxation factor given for mode {mode}"
                )));
            }
            cfg.relax_a = a
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad relaxation factor `{a}`")))?;
            label = format!("{label}:{a}");
        }
        Ok(Self { label, cfg })
    }
}

/// Share of evaluations done in one format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormatShare {
    pub format: String,
    pub bits: u32,
    pub evaluations: u64,
    pub percent: f64,
    /// Successful evaluations over evaluations in this format.
    pub success_percent: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub first_order: usize,
    pub max_iter: usize,
    pub precision_failure: usize,
    pub stalled: usize,
}

impl StatusCounts {
    fn add(&mut self, s: Status) {
        match s {
            Status::FirstOrder => self.first_order += 1,
            Status::MaxIter => self.max_iter += 1,
            Status::PrecisionFailure => self.precision_failure += 1,
            Status::Stalled => self.stalled += 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub label: String,
    pub mode: SolverMode,
    pub problems: usize,
    pub statuses: StatusCounts,
    pub objective: Vec<FormatShare>,
    pub gradient: Vec<FormatShare>,
    /// Against the single-format baseline, when one was run.
    pub versus_baseline: Option<Comparison>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverRuns {
    pub label: String,
    pub runs: Vec<RunReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub solvers: Vec<SolverRuns>,
    pub summaries: Vec<SolverSummary>,
}

impl SuiteReport {
    pub fn runs_of(&self, label: &str) -> Option<&[RunReport]> {
        self.solvers
            .iter()
            .find(|s| s.label == label)
            .map(|s| s.runs.as_slice())
    }

    pub fn summary_of(&self, label: &str) -> Option<&SolverSummary> {
        self.summaries.iter().find(|s| s.label == label)
    }
}

/// Per-format shares of all evaluations of `kind`.
pub fn format_shares(runs: &[RunReport], kind: EvalKind) -> Vec<FormatShare> {
    let mut acc: Option<EvalCounters> = None;
    for r in runs {
        match &mut acc {
            Some(a) => a.merge(&r.counters),
            None => acc = Some(r.counters.clone()),
        }
    }
    let Some(c) = acc else { return Vec::new() };
    let counts = c.get(kind);
    let total: u64 = counts.iter().map(|n| n.total).sum();
    c.formats
        .iter()
        .zip(&c.bits)
        .zip(counts)
        .map(|((f, &bits), n)| FormatShare {
            format: f.clone(),
            bits,
            evaluations: n.total,
            percent: if total == 0 {
                0.0
            } else {
                100.0 * n.total as f64 / total as f64
            },
            success_percent: if n.total == 0 {
                0.0
            } else {
                100.0 * n.success as f64 / n.total as f64
            },
        })
        .collect()
}

/// Label of the single-format comparator in a suite.
pub const BASELINE: &str = "r2";

/// Run every problem under every solver, then aggregate.
pub fn run_suite(specs: &[SolverSpec], problems: &[Problem]) -> SuiteReport {
    let mut solvers = Vec::with_capacity(specs.len());
    for spec in specs {
        let runs = problems
            .iter()
            .filter_map(|p| match solve(p, &spec.cfg) {
                Ok(r) => Some(r),
                Err(e) => {
                    eprintln!("{}: {}: {e}", spec.label, p.name());
                    None
                }
            })
            .collect();
        solvers.push(SolverRuns {
            label: spec.label.clone(),
            runs,
        });
    }
    summarize(solvers)
}

/// Aggregate collected runs. Independent of the order of problems.
pub fn summarize(solvers: Vec<SolverRuns>) -> SuiteReport {
    let model = EffortModel;
    let baseline = solvers.iter().find(|s| s.label == BASELINE).cloned();
    let summaries = solvers
        .iter()
        .map(|s| {
            let mut statuses = StatusCounts::default();
            for r in &s.runs {
                statuses.add(r.status);
            }
            let versus_baseline = baseline
                .as_ref()
                .and_then(|b| compare(&s.label, &s.runs, &b.label, &b.runs, &model).ok());
            SolverSummary {
                label: s.label.clone(),
                mode: s.runs.first().map_or(SolverMode::R2, |r| r.mode),
                problems: s.runs.len(),
                statuses,
                objective: format_shares(&s.runs, EvalKind::Objective),
                gradient: format_shares(&s.runs, EvalKind::Gradient),
                versus_baseline,
            }
        })
        .collect();
    SuiteReport { solvers, summaries }
}
