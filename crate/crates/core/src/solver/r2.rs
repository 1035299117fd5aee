use crate::defined::DefinedReal;
use crate::evalmodel::{eval_gradient, eval_objective, ErrorMode, EvalError};
use crate::fpenv::{fp_norm_in, FormatStack, TaggedVector};
use crate::harness::EffortModel;
use crate::problems::Problem;

use super::config::{validate_params, SolverConfig};
use super::invariants::certify_first_order;
use super::steps::{compute_candidate, compute_step, model_decrease, rho_and_accept, update_sigma};
use super::{EffortSummary, EvalCounters, EvalKind, IterRecord, RunReport, SolverError, Status};

/// Quadratic regularization in the finest format of `cfg.formats`, with no
/// rounding-error terms.
pub fn run_r2(p: &Problem, cfg: &SolverConfig) -> Result<RunReport, SolverError> {
    let warnings = validate_params(cfg)?;
    let fmt = cfg.formats.top();
    let stack = FormatStack::new(vec![fmt]).map_err(EvalError::from)?;
    let mut counters = EvalCounters::new(&stack);
    let mut trace = Vec::new();
    let name = fmt.name().to_string();

    let mut x = TaggedVector::new(p.x0().to_vec(), fmt).map_err(EvalError::from)?;
    let mut sigma = cfg.sigma0;
    let mut k = 0;
    let mut successful = 0;
    let mut gnorm = f64::NAN;
    let mut g: Option<TaggedVector> = None;

    let eval_f =
        |x: &TaggedVector, counters: &mut EvalCounters| -> Result<Option<f64>, SolverError> {
            counters.record(EvalKind::Objective, 0, true);
            match eval_objective(p, x, fmt, ErrorMode::Exact) {
                Ok(ev) => Ok(Some(ev.value.value())),
                Err(EvalError::Fp(_)) => Ok(None),
                Err(e) => Err(e.into()),
            }
        };

    let mut f = eval_f(&x, &mut counters)?;
    let (status, detail) = 'run: loop {
        let Some(fx) = f else {
            break (
                Status::PrecisionFailure,
                "objective overflows at the starting point".to_string(),
            );
        };
        if k >= cfg.max_iter {
            break (Status::MaxIter, String::new());
        }
        let x_rec = cfg.record_iterates.then(|| x.values().to_vec());
        if g.is_none() {
            counters.record(EvalKind::Gradient, 0, true);
            let ge = match eval_gradient(p, &x, fmt, ErrorMode::Exact) {
                Ok(ge) => ge.value,
                Err(EvalError::Fp(_)) => {
                    break (
                        Status::PrecisionFailure,
                        "gradient_overflow in the top format".into(),
                    )
                }
                Err(e) => return Err(e.into()),
            };
            gnorm = match fp_norm_in(&ge, fmt) {
                Ok(r) => r.value.value(),
                Err(_) => {
                    break (
                        Status::PrecisionFailure,
                        "gradient_norm_overflow in the top format".into(),
                    )
                }
            };
            if gnorm <= cfg.eps {
                break (Status::FirstOrder, String::new());
            }
            g = Some(ge);
        }
        let gv = g.as_ref().expect("gradient available");

        // ρ = -∞ on any overflow of the step or the candidate's objective.
        let mut outcome = None;
        let mut delta_t = f64::NAN;
        if let Ok(s) = compute_step(gv, sigma) {
            let s = s.value;
            if let Ok(dt) = model_decrease(gv, &s) {
                delta_t = dt.value.value();
                if delta_t <= 0.0 {
                    break (Status::Stalled, "model decrease is zero".into());
                }
                if let Ok(c) = compute_candidate(&x, &s, fmt) {
                    if c.unchanged {
                        break 'run (Status::Stalled, "candidate equals the iterate".into());
                    }
                    if let Some(fp) = eval_f(&c.value, &mut counters)? {
                        outcome = Some((c.value, fp));
                    }
                }
            }
        }
        let (rho, accepted) = match &outcome {
            Some((_, fp)) => rho_and_accept(fx, *fp, DefinedReal::from(delta_t), cfg.eta1),
            None => (DefinedReal::from(f64::NEG_INFINITY), false),
        };
        if cfg.record_trace {
            trace.push(IterRecord {
                k,
                pi_x: name.clone(),
                pi_g: name.clone(),
                pi_c: name.clone(),
                pi_f: outcome.as_ref().map(|_| name.clone()),
                sigma,
                gnorm,
                delta_t,
                mu: 0.0,
                rho: outcome.as_ref().map(|_| rho.to_f64()),
                accepted,
                flags: Vec::new(),
                x: x_rec,
            });
        }
        if accepted {
            let (c, fp) = outcome.expect("accepted step has a candidate");
            x = c;
            f = Some(fp);
            g = None;
            successful += 1;
        }
        k += 1;
        match update_sigma(sigma, rho, cfg) {
            Ok(s) => sigma = s,
            Err(_) => break (Status::Stalled, "sigma overflow".into()),
        }
    };

    let certified =
        (status == Status::FirstOrder).then(|| certify_first_order(p, x.values(), cfg.eps).holds);
    let effort = EffortSummary::of(&counters, &EffortModel::default());
    Ok(RunReport {
        problem: p.name().to_string(),
        n: p.dim(),
        mode: cfg.mode,
        status,
        detail: (!detail.is_empty()).then_some(detail),
        iterations: k,
        successful,
        x: x.into_values(),
        x_format: name,
        f: f.unwrap_or(f64::NAN),
        gnorm,
        sigma,
        counters,
        effort,
        certified,
        warnings,
        violations: Vec::new(),
        trace,
    })
}
