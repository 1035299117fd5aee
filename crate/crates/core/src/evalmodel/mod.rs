//! Objective and gradient evaluation in a chosen format, returning the
//! computed value together with an error bound.
//!
//! * Guaranteed mode runs a rounded pass and an outward-rounded interval pass
//!   over the same expression; `ω_f` is the largest distance from `f̂` to an
//!   interval endpoint and `ω_g = ‖r‖/‖ĝ‖` with `r_i` the same distance per
//!   gradient component.
//! * Relaxed mode uses `ω_f = 2u|f̂|` and `ω_g = 2u`.
//! * Exact mode reports zero errors.

mod interval;
mod reference;
mod rounded;

pub use interval::{Interval, IntervalArith};
pub use reference::{rat, sqrt_bracket, DefinedArith, RatInterval, RationalArith};
pub use rounded::RoundedArith;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::defined::DefinedReal;
use crate::expr::Expr;
use crate::fpenv::{FpError, FpFormat, TaggedValue, TaggedVector};
use crate::problems::Problem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorMode {
    Guaranteed,
    Relaxed,
    Exact,
}

impl fmt::Display for ErrorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorMode::Guaranteed => "guaranteed",
            ErrorMode::Relaxed => "relaxed",
            ErrorMode::Exact => "exact",
        })
    }
}

impl FromStr for ErrorMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "guaranteed" => Ok(ErrorMode::Guaranteed),
            "relaxed" => Ok(ErrorMode::Relaxed),
            "exact" => Ok(ErrorMode::Exact),
            _ => Err(format!("unknown error mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Fp(#[from] FpError),
    #[error("evaluation in {eval} of a point stored in {point} is forbidden")]
    Forbidden {
        point: &'static str,
        eval: &'static str,
    },
    #[error("point has dimension {got}, expected {want}")]
    Dimension { got: usize, want: usize },
    #[error("computed gradient is zero but its error radius is {radius:e}")]
    ZeroGradientBound { radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveEval {
    pub value: TaggedValue,
    pub omega: DefinedReal,
    pub underflow: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientEval {
    pub value: TaggedVector,
    /// Relative bound: `‖∇f - ĝ‖ <= omega ‖ĝ‖`.
    pub omega: DefinedReal,
    /// Absolute bound on `‖∇f - ĝ‖` (guaranteed mode only, zero otherwise).
    pub radius: DefinedReal,
    pub underflow: bool,
}

// `1 + 2^-90`, covering the double-double rounding of the norms.
fn dd_slack() -> DefinedReal {
    DefinedReal::from_parts(1.0, crate::fpenv::pow2(-90))
}

fn check_point(expr: &Expr, x: &TaggedVector, fmt: FpFormat) -> Result<(), EvalError> {
    if x.len() != expr.dim() {
        return Err(EvalError::Dimension {
            got: x.len(),
            want: expr.dim(),
        });
    }
    if x.format().is_finer_than(&fmt) {
        return Err(EvalError::Forbidden {
            point: x.format().name(),
            eval: fmt.name(),
        });
    }
    Ok(())
}

/// Outward-rounded enclosure of `f(x)` in `fmt`.
pub fn interval_extension(
    p: &Problem,
    x: &TaggedVector,
    fmt: FpFormat,
) -> Result<Interval, EvalError> {
    check_point(p.expr(), x, fmt)?;
    Ok(p.expr().eval(&IntervalArith::new(fmt, x.values()))?)
}

pub fn eval_objective(
    p: &Problem,
    x: &TaggedVector,
    fmt: FpFormat,
    mode: ErrorMode,
) -> Result<ObjectiveEval, EvalError> {
    let expr = p.expr();
    check_point(expr, x, fmt)?;
    let arith = RoundedArith::new(fmt, x.values());
    let f = expr.eval(&arith)?;
    let omega = match mode {
        ErrorMode::Exact => DefinedReal::ZERO,
        ErrorMode::Relaxed => fmt.unit_roundoff() * 2.0 * f.abs(),
        ErrorMode::Guaranteed => {
            let iv = expr.eval(&IntervalArith::new(fmt, x.values()))?;
            dist(iv, f)
        }
    };
    Ok(ObjectiveEval {
        value: TaggedValue::new(f, fmt)?,
        omega,
        underflow: arith.underflowed(),
    })
}

/// Max distance from `v` to the endpoints, exact in double-double.
fn dist(iv: Interval, v: f64) -> DefinedReal {
    let a = (DefinedReal::from(v) - DefinedReal::from(iv.lo)).abs();
    let b = (DefinedReal::from(iv.hi) - DefinedReal::from(v)).abs();
    a.max(b)
}

pub fn eval_gradient(
    p: &Problem,
    x: &TaggedVector,
    fmt: FpFormat,
    mode: ErrorMode,
) -> Result<GradientEval, EvalError> {
    let expr = p.expr();
    check_point(expr, x, fmt)?;
    let arith = RoundedArith::new(fmt, x.values());
    let (_, g) = expr.eval_with_gradient(&arith)?;
    let underflow = arith.underflowed();
    let value = TaggedVector::new(g, fmt)?;
    let (omega, radius) = match mode {
        ErrorMode::Exact => (DefinedReal::ZERO, DefinedReal::ZERO),
        ErrorMode::Relaxed => (fmt.unit_roundoff() * 2.0, DefinedReal::ZERO),
        ErrorMode::Guaranteed => {
            let (_, ig) = expr.eval_with_gradient(&IntervalArith::new(fmt, x.values()))?;
            let r2: DefinedReal = ig
                .iter()
                .zip(value.values())
                .map(|(iv, &gi)| dist(*iv, gi).sqr())
                .sum();
            let radius = r2.sqrt() * dd_slack();
            let g2: DefinedReal = value
                .values()
                .iter()
                .map(|&gi| DefinedReal::from(gi).sqr())
                .sum();
            if g2.is_zero() {
                if radius.is_zero() {
                    (DefinedReal::ZERO, radius)
                } else {
                    return Err(EvalError::ZeroGradientBound {
                        radius: radius.to_f64(),
                    });
                }
            } else {
                (radius / (g2.sqrt() / dd_slack()), radius)
            }
        }
    };
    Ok(GradientEval {
        value,
        omega,
        radius,
        underflow,
    })
}

/// Double-double value and gradient, used to double-check results.
pub fn defined_gradient(
    p: &Problem,
    x: &[f64],
) -> Result<(DefinedReal, Vec<DefinedReal>), FpError> {
    p.expr().eval_with_gradient(&DefinedArith::new(x))
}

#[cfg(test)]
mod tests;
