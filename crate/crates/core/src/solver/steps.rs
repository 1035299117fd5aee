use thiserror::Error;

use crate::defined::DefinedReal;
use crate::errbounds::ErrorContext;
use crate::fpenv::{
    cast, dot_slices, fp_op, FpError, FpFormat, Op, Rounded, TaggedValue, TaggedVector,
};

use super::config::SolverConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("sigma = {0:e} is not representable in {1}")]
    SigmaNotRepresentable(f64, &'static str),
    #[error(transparent)]
    Fp(#[from] FpError),
}

/// `ŝ = fl(-ĝ/σ)` componentwise in the gradient's format.
pub fn compute_step(g: &TaggedVector, sigma: f64) -> Result<Rounded<TaggedVector>, StepError> {
    let fmt = g.format();
    if !fmt.represents(sigma) || sigma <= 0.0 {
        return Err(StepError::SigmaNotRepresentable(sigma, fmt.name()));
    }
    let mut underflow = false;
    let mut out = Vec::with_capacity(g.len());
    for &gi in g.values() {
        let r = crate::fpenv::apply(Op::Div, -gi, sigma, &fmt)?;
        underflow |= gi != 0.0 && r.underflow();
        out.push(r.value);
    }
    Ok(Rounded {
        value: TaggedVector::from_raw(out, fmt),
        underflow,
    })
}

/// `ΔT̂ = -fl(ĝᵀŝ)`, accumulated in the gradient's format.
pub fn model_decrease(g: &TaggedVector, s: &TaggedVector) -> Result<Rounded<TaggedValue>, FpError> {
    if g.len() != s.len() {
        return Err(FpError::LengthMismatch(g.len(), s.len()));
    }
    let fmt = g.format().finer(s.format());
    let (d, underflow) = dot_slices(g.values(), s.values(), &fmt)?;
    Ok(Rounded {
        value: TaggedValue::new(-d + 0.0, fmt)?,
        underflow,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub value: TaggedVector,
    /// Some component lost accuracy to a subnormal result.
    pub underflow: bool,
    /// `fl(x̂+ŝ) = x̂` already in the step's format.
    pub sum_unchanged: bool,
    /// The candidate equals `x̂` after the cast.
    pub unchanged: bool,
}

impl Candidate {
    pub fn stalled(&self) -> bool {
        self.unchanged
    }
}

/// `ĉ = fl(x̂+ŝ)` in the step's format, then cast to `to`.
pub fn compute_candidate(
    x: &TaggedVector,
    s: &TaggedVector,
    to: FpFormat,
) -> Result<Candidate, FpError> {
    if x.len() != s.len() {
        return Err(FpError::LengthMismatch(x.len(), s.len()));
    }
    let fmt = x.format().finer(s.format());
    let mut underflow = false;
    let mut sum = Vec::with_capacity(x.len());
    for (&a, &b) in x.values().iter().zip(s.values()) {
        let r = crate::fpenv::apply(Op::Add, a, b, &fmt)?;
        underflow |= r.underflow();
        sum.push(r.value);
    }
    let sum_unchanged = sum == x.values();
    let sum = TaggedVector::from_raw(sum, fmt);
    let c = cast(&sum, to)?;
    let unchanged = c.value.values() == x.values();
    Ok(Candidate {
        value: c.value,
        underflow: underflow || c.underflow,
        sum_unchanged,
        unchanged,
    })
}

/// `ρ = (f̂ - f̂⁺)/ΔT̂` in double-double; accepted iff `ρ >= η1`.
pub fn rho_and_accept(f: f64, f_plus: f64, delta_t: DefinedReal, eta1: f64) -> (DefinedReal, bool) {
    let rho = (DefinedReal::from(f) - DefinedReal::from(f_plus)) / delta_t;
    (rho, rho >= eta1)
}

/// `ρ` computed with two roundings in `fmt`.
pub fn rho_in_format(f: f64, f_plus: f64, delta_t: f64, fmt: FpFormat) -> DefinedReal {
    let a = TaggedValue::new(f, fmt);
    let b = TaggedValue::new(f_plus, fmt);
    let d = TaggedValue::new(delta_t, fmt);
    let q = match (a, b, d) {
        (Ok(a), Ok(b), Ok(d)) => fp_op(a, b, Op::Sub).and_then(|num| fp_op(num.value, d, Op::Div)),
        _ => Err(FpError::NotFinite),
    };
    match q {
        Ok(q) => q.value.to_defined(),
        Err(_) => (DefinedReal::from(f) - DefinedReal::from(f_plus)) / DefinedReal::from(delta_t),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("sigma overflow")]
pub struct SigmaOverflow;

pub fn update_sigma(
    sigma: f64,
    rho: DefinedReal,
    cfg: &SolverConfig,
) -> Result<f64, SigmaOverflow> {
    let next = if rho >= cfg.eta2 {
        (cfg.gamma1 * sigma).max(cfg.sigma_min)
    } else if rho >= cfg.eta1 {
        sigma
    } else {
        cfg.gamma3 * sigma
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(SigmaOverflow)
    }
}

/// Least stack index `>= from` whose predicted error passes `bound`, or the
/// top index. `predict(j)` returns the predicted error at index `j`.
pub(crate) fn first_passing(
    ctx: &ErrorContext,
    from: usize,
    bound: DefinedReal,
    predict: impl Fn(usize) -> DefinedReal,
) -> usize {
    let top = ctx.stack().top_index();
    (from..=top).find(|&j| predict(j) <= bound).unwrap_or(top)
}
