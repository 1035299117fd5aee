//! Quadratic-regularization solvers: the single-format baseline and the
//! multi-precision variant with rounding-error-aware precision selection.

mod config;
mod invariants;
mod mpr2;
mod r2;
mod steps;

pub use config::{validate_params, ConfigError, SolverConfig, SolverMode};
pub use invariants::{certify_first_order, sigma_max, successful_iteration_bound, Certificate};
pub use mpr2::run_mpr2;
pub use r2::run_r2;
pub use steps::{
    compute_candidate, compute_step, model_decrease, rho_and_accept, rho_in_format, update_sigma,
    Candidate, SigmaOverflow, StepError,
};

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::errbounds::BoundError;
use crate::evalmodel::EvalError;
use crate::fpenv::FormatStack;
use crate::harness::EffortModel;
use crate::problems::Problem;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bounds(#[from] BoundError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    FirstOrder,
    MaxIter,
    PrecisionFailure,
    Stalled,
}

impl Status {
    pub fn short(&self) -> &'static str {
        match self {
            Status::FirstOrder => "FO",
            Status::MaxIter => "MI",
            Status::PrecisionFailure => "F",
            Status::Stalled => "ST",
        }
    }

    pub fn is_solved(&self) -> bool {
        *self == Status::FirstOrder
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::FirstOrder => "first_order",
            Status::MaxIter => "max_iter",
            Status::PrecisionFailure => "precision_failure",
            Status::Stalled => "stalled",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Count {
    pub total: u64,
    pub success: u64,
}

/// Evaluation counts per format, in stack order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalCounters {
    pub formats: Vec<String>,
    pub bits: Vec<u32>,
    pub objective: Vec<Count>,
    pub gradient: Vec<Count>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalKind {
    Objective,
    Gradient,
}

impl EvalCounters {
    pub fn new(stack: &FormatStack) -> Self {
        Self {
            formats: stack.iter().map(|f| f.name().to_string()).collect(),
            bits: stack.iter().map(|f| f.bits()).collect(),
            objective: vec![Count::default(); stack.len()],
            gradient: vec![Count::default(); stack.len()],
        }
    }

    fn slot(&mut self, kind: EvalKind) -> &mut Vec<Count> {
        match kind {
            EvalKind::Objective => &mut self.objective,
            EvalKind::Gradient => &mut self.gradient,
        }
    }

    pub fn get(&self, kind: EvalKind) -> &[Count] {
        match kind {
            EvalKind::Objective => &self.objective,
            EvalKind::Gradient => &self.gradient,
        }
    }

    /// Record an evaluation, counted as successful until demoted.
    pub fn record(&mut self, kind: EvalKind, i: usize, success: bool) {
        let c = &mut self.slot(kind)[i];
        c.total += 1;
        c.success += success as u64;
    }

    /// A previously successful evaluation had to be redone in a finer format.
    pub fn demote(&mut self, kind: EvalKind, i: usize) {
        let c = &mut self.slot(kind)[i];
        debug_assert!(c.success > 0);
        c.success = c.success.saturating_sub(1);
    }

    pub fn total(&self, kind: EvalKind) -> u64 {
        self.get(kind).iter().map(|c| c.total).sum()
    }

    /// Add counts of `other`, matching formats by name.
    pub fn merge(&mut self, other: &EvalCounters) {
        for (j, name) in other.formats.iter().enumerate() {
            let i = match self.formats.iter().position(|f| f == name) {
                Some(i) => i,
                None => {
                    self.formats.push(name.clone());
                    self.bits.push(other.bits[j]);
                    self.objective.push(Count::default());
                    self.gradient.push(Count::default());
                    self.formats.len() - 1
                }
            };
            for kind in [EvalKind::Objective, EvalKind::Gradient] {
                let src = other.get(kind)[j];
                let dst = &mut self.slot(kind)[i];
                dst.total += src.total;
                dst.success += src.success;
            }
        }
    }
}

/// Weighted evaluation counts under an effort model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EffortSummary {
    pub objective_time: f64,
    pub objective_energy: f64,
    pub gradient_time: f64,
    pub gradient_energy: f64,
}

impl EffortSummary {
    pub fn of(c: &EvalCounters, model: &EffortModel) -> Self {
        let weigh = |kind: EvalKind, w: &dyn Fn(u32) -> f64| -> f64 {
            c.get(kind)
                .iter()
                .zip(&c.bits)
                .map(|(n, &b)| n.total as f64 * w(b))
                .sum()
        };
        Self {
            objective_time: weigh(EvalKind::Objective, &|b| model.time_weight(b)),
            objective_energy: weigh(EvalKind::Objective, &|b| model.energy_weight(b)),
            gradient_time: weigh(EvalKind::Gradient, &|b| model.time_weight(b)),
            gradient_energy: weigh(EvalKind::Gradient, &|b| model.energy_weight(b)),
        }
    }
}

/// One line of the iteration trace.
///
/// Format fields hold format names; `pi_f` is the format of the candidate's
/// objective value and is absent when the iteration ended before it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub k: usize,
    pub pi_x: String,
    pub pi_g: String,
    pub pi_c: String,
    pub pi_f: Option<String>,
    pub sigma: f64,
    pub gnorm: f64,
    pub delta_t: f64,
    pub mu: f64,
    pub rho: Option<f64>,
    pub accepted: bool,
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub n: usize,
    pub mode: SolverMode,
    pub status: Status,
    pub detail: Option<String>,
    pub iterations: usize,
    pub successful: usize,
    pub x: Vec<f64>,
    pub x_format: String,
    pub f: f64,
    pub gnorm: f64,
    pub sigma: f64,
    pub counters: EvalCounters,
    pub effort: EffortSummary,
    /// Independent check of the gradient norm at a first-order exit.
    pub certified: Option<bool>,
    pub warnings: Vec<String>,
    pub violations: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<IterRecord>,
}

impl RunReport {
    pub fn solved(&self) -> bool {
        self.status.is_solved()
    }
}

/// Run the solver selected by `cfg.mode`.
pub fn solve(p: &Problem, cfg: &SolverConfig) -> Result<RunReport, SolverError> {
    match cfg.mode {
        SolverMode::R2 => run_r2(p, cfg),
        _ => run_mpr2(p, cfg),
    }
}

/// One JSON object per line.
pub fn write_trace_jsonl<W: Write>(records: &[IterRecord], mut w: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
