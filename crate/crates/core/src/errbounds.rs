//! Rounding-error coefficients of the multi-precision solver, all computed in
//! [`DefinedReal`] arithmetic.
//!
//! Index conventions: `gamma_n(n, u)` is `γ_n`; `alpha_n(n, u)` is
//! `α_{n+1} = 1/(1-γ_{n+1})`; `beta_n(n, u)` is built on `γ_n`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::defined::DefinedReal;
use crate::fpenv::{fp_op, FormatStack, FpFormat, Op, TaggedValue};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("n*u >= 1 or gamma >= 1 (n = {n}, u = {u})")]
    InvalidDimension { n: usize, u: f64 },
    #[error("gamma_(n+2)(u_max) = {gamma} >= 1 for n = {n}")]
    DimensionTooLarge { n: usize, gamma: f64 },
    #[error("step norm is zero")]
    DegenerateStep,
    #[error("unknown gamma formula `{0}`")]
    UnknownFormula(String),
}

/// Choice of the accumulated-rounding bound `γ_n`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GammaFormula {
    /// `nu`
    #[default]
    Linear,
    /// `nu / (1 - nu)`
    Classic,
    /// `nu / (1 - nu/2)`
    Halved,
}

impl GammaFormula {
    pub fn as_str(&self) -> &'static str {
        match self {
            GammaFormula::Linear => "nu",
            GammaFormula::Classic => "nu/(1-nu)",
            GammaFormula::Halved => "nu/(1-nu/2)",
        }
    }
}

impl fmt::Display for GammaFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GammaFormula {
    type Err = BoundError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "nu" | "linear" => Ok(GammaFormula::Linear),
            "nu/(1-nu)" | "classic" => Ok(GammaFormula::Classic),
            "nu/(1-nu/2)" | "halved" => Ok(GammaFormula::Halved),
            other => Err(BoundError::UnknownFormula(other.to_string())),
        }
    }
}

pub fn gamma_n(formula: GammaFormula, n: usize, u: DefinedReal) -> Result<DefinedReal, BoundError> {
    let nu = DefinedReal::from(n) * u;
    if n == 0 {
        return Ok(DefinedReal::ZERO);
    }
    match formula {
        GammaFormula::Linear => Ok(nu),
        GammaFormula::Classic => {
            if nu >= 1.0 {
                return Err(BoundError::InvalidDimension { n, u: u.to_f64() });
            }
            Ok(nu / (DefinedReal::ONE - nu))
        }
        GammaFormula::Halved => {
            if nu >= 1.0 {
                return Err(BoundError::InvalidDimension { n, u: u.to_f64() });
            }
            Ok(nu / (DefinedReal::ONE - nu * 0.5))
        }
    }
}

/// `max(|sqrt(1-γ_n) - 1|, |sqrt(1+γ_n) - 1|)`.
pub fn beta_n(formula: GammaFormula, n: usize, u: DefinedReal) -> Result<DefinedReal, BoundError> {
    let g = gamma_n(formula, n, u)?;
    beta_from_gamma(g).ok_or(BoundError::InvalidDimension { n, u: u.to_f64() })
}

pub(crate) fn beta_from_gamma(g: DefinedReal) -> Option<DefinedReal> {
    if g >= 1.0 {
        return None;
    }
    let one = DefinedReal::ONE;
    let low = one - (one - g).sqrt();
    let high = (one + g).sqrt() - one;
    Some(low.max(high))
}

/// `α_{n+1} = 1 / (1 - γ_{n+1}(u))`.
pub fn alpha_n(formula: GammaFormula, n: usize, u: DefinedReal) -> Result<DefinedReal, BoundError> {
    let g = gamma_n(formula, n + 1, u)?;
    if g >= 1.0 {
        return Err(BoundError::InvalidDimension {
            n: n + 1,
            u: u.to_f64(),
        });
    }
    Ok((DefinedReal::ONE - g).recip())
}

/// Combined rounding of the candidate sum and its cast. When the candidate
/// format is at least as precise as the gradient format only `u_g` remains.
pub fn u_prime(u_g: DefinedReal, u_c: DefinedReal) -> DefinedReal {
    if u_c <= u_g {
        u_g
    } else {
        u_g + u_c + u_g * u_c
    }
}

pub fn lambda_k(phi: DefinedReal, u_prime: DefinedReal) -> DefinedReal {
    u_prime * (phi + DefinedReal::ONE)
}

/// `ε / ((1 + β) (1 + ω_g))`.
pub fn stopping_threshold(
    eps: DefinedReal,
    omega_g: DefinedReal,
    beta: DefinedReal,
) -> DefinedReal {
    eps / ((DefinedReal::ONE + beta) * (DefinedReal::ONE + omega_g))
}

/// Bounds of one format for a fixed dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FormatBounds {
    pub u: DefinedReal,
    pub gamma_n: DefinedReal,
    pub gamma_n1: DefinedReal,
    pub gamma_n2: DefinedReal,
    pub beta_n2: DefinedReal,
    pub alpha_n1: DefinedReal,
}

impl FormatBounds {
    fn compute(formula: GammaFormula, n: usize, u: DefinedReal) -> Result<Self, BoundError> {
        Ok(Self {
            u,
            gamma_n: gamma_n(formula, n, u)?,
            gamma_n1: gamma_n(formula, n + 1, u)?,
            gamma_n2: gamma_n(formula, n + 2, u)?,
            beta_n2: beta_n(formula, n + 2, u)?,
            alpha_n1: alpha_n(formula, n, u)?,
        })
    }

    fn zero() -> Self {
        Self {
            u: DefinedReal::ZERO,
            gamma_n: DefinedReal::ZERO,
            gamma_n1: DefinedReal::ZERO,
            gamma_n2: DefinedReal::ZERO,
            beta_n2: DefinedReal::ZERO,
            alpha_n1: DefinedReal::ONE,
        }
    }
}

/// Per-format error coefficients for a problem of dimension `n`.
///
/// In exact mode every unit roundoff is treated as zero; this turns the
/// multi-precision solver into the plain inexact-evaluation method.
#[derive(Clone, Debug)]
pub struct ErrorContext {
    n: usize,
    formula: GammaFormula,
    stack: FormatStack,
    bounds: Vec<FormatBounds>,
    exact: bool,
}

impl ErrorContext {
    /// Fails when `γ_{n+2}(u_max) >= 1`.
    pub fn new(n: usize, formula: GammaFormula, stack: &FormatStack) -> Result<Self, BoundError> {
        let g = gamma_n(formula, n + 2, stack.u_max());
        match g {
            Ok(g) if g < 1.0 => {}
            Ok(g) => {
                return Err(BoundError::DimensionTooLarge {
                    n,
                    gamma: g.to_f64(),
                })
            }
            Err(_) => {
                return Err(BoundError::DimensionTooLarge {
                    n,
                    gamma: f64::INFINITY,
                })
            }
        }
        let bounds = stack
            .iter()
            .map(|f| FormatBounds::compute(formula, n, f.unit_roundoff()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            n,
            formula,
            stack: stack.clone(),
            bounds,
            exact: false,
        })
    }

    /// All rounding coefficients zero.
    pub fn exact(n: usize, stack: &FormatStack) -> Self {
        Self {
            n,
            formula: GammaFormula::Linear,
            stack: stack.clone(),
            bounds: vec![FormatBounds::zero(); stack.len()],
            exact: true,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn formula(&self) -> GammaFormula {
        self.formula
    }

    pub fn stack(&self) -> &FormatStack {
        &self.stack
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Bounds for stack index `i`.
    pub fn at(&self, i: usize) -> &FormatBounds {
        &self.bounds[i]
    }

    /// Bounds for an arbitrary format of the stack.
    pub fn of(&self, fmt: FpFormat) -> &FormatBounds {
        let i = self
            .stack
            .index_of(fmt)
            .expect("format is not part of the stack");
        &self.bounds[i]
    }

    pub fn u(&self, i: usize) -> DefinedReal {
        self.bounds[i].u
    }

    /// `γ_2(u)` for the finite-precision `rho` correction.
    pub fn gamma_2(&self, u: DefinedReal) -> DefinedReal {
        if self.exact {
            return DefinedReal::ZERO;
        }
        gamma_n(self.formula, 2, u).unwrap_or(DefinedReal::INFINITY)
    }

    /// `φ = fl(‖x‖/‖s‖) (1+β_{n+2}(u_x)) / (1-β_{n+2}(u_g)) (1+u_div)`, where
    /// `u_x`, `u_g` are the roundoffs of the formats the two norms were
    /// computed in and `u_div` that of the quotient. Returns `+inf` when the
    /// quotient overflows.
    pub fn phi_bound(
        &self,
        norm_x: TaggedValue,
        norm_s: TaggedValue,
    ) -> Result<DefinedReal, BoundError> {
        if norm_s.value() == 0.0 {
            return Err(BoundError::DegenerateStep);
        }
        let q = match fp_op(norm_x, norm_s, Op::Div) {
            Ok(q) => q.value,
            Err(_) => return Ok(DefinedReal::INFINITY),
        };
        let bx = self.of(norm_x.format()).beta_n2;
        let bs = self.of(norm_s.format()).beta_n2;
        let ud = self.of(q.format()).u;
        Ok(phi_from_parts(q.to_defined(), bx, bs, ud))
    }

    /// `μ` at gradient format index `g`, evaluated term by term:
    /// `(α ω_g (1+λ) + α λ + u_g + γ_{n+1} α) / (1 - u_g)`.
    pub fn mu_k(&self, g: usize, omega_g: DefinedReal, lambda: DefinedReal) -> DefinedReal {
        let b = &self.bounds[g];
        mu_from_parts(b.u, b.alpha_n1, b.gamma_n1, omega_g, lambda)
    }
}

pub fn phi_from_parts(
    ratio: DefinedReal,
    beta_x: DefinedReal,
    beta_s: DefinedReal,
    u_div: DefinedReal,
) -> DefinedReal {
    let one = DefinedReal::ONE;
    ratio * (one + beta_x) / (one - beta_s) * (one + u_div)
}

pub fn mu_from_parts(
    u_g: DefinedReal,
    alpha: DefinedReal,
    gamma_n1: DefinedReal,
    omega_g: DefinedReal,
    lambda: DefinedReal,
) -> DefinedReal {
    let one = DefinedReal::ONE;
    let num = alpha * omega_g * (one + lambda) + alpha * lambda + u_g + gamma_n1 * alpha;
    num / (one - u_g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn rat(x: DefinedReal) -> BigRational {
        BigRational::from_float(x.hi()).unwrap() + BigRational::from_float(x.lo()).unwrap()
    }

    fn close(a: DefinedReal, b: f64, rel: f64) -> bool {
        ((a.to_f64() - b) / b).abs() <= rel
    }

    const U11: f64 = 1.0 / 2048.0;

    #[test]
    fn gamma_values() {
        let u = DefinedReal::from(U11);
        assert_eq!(gamma_n(GammaFormula::Linear, 4, u).unwrap(), 0.001953125);
        let g = gamma_n(GammaFormula::Classic, 4, u).unwrap();
        // 4/2044 exactly
        let want = BigRational::new(BigInt::from(4), BigInt::from(2044));
        let err = (rat(g) - &want) / &want;
        assert!(err < BigRational::new(1.into(), BigInt::from(2).pow(100)));
        assert!(err > -BigRational::new(1.into(), BigInt::from(2).pow(100)));
        assert!(close(g, 0.00195694716242661, 1e-14));
        for f in [
            GammaFormula::Linear,
            GammaFormula::Classic,
            GammaFormula::Halved,
        ] {
            assert!(gamma_n(f, 0, u).unwrap().is_zero());
        }
        assert!(gamma_n(GammaFormula::Classic, 2048, u).is_err());
    }

    #[test]
    fn beta_values() {
        assert!(beta_from_gamma(DefinedReal::ZERO).unwrap().is_zero());
        let b = beta_n(GammaFormula::Linear, 4, DefinedReal::from(U11)).unwrap();
        let g = 4.0 / 2048.0;
        assert!(close(b, 1.0 - (1.0f64 - g).sqrt(), 1e-12));
        assert!(close(b, 9.7703e-4, 1e-4));
    }

    #[test]
    fn alpha_values() {
        let u = DefinedReal::from(U11);
        let a = alpha_n(GammaFormula::Linear, 3, u).unwrap();
        assert!(close(a, 1.0 / (1.0 - 4.0 / 2048.0), 1e-15));
        // 2048/2044
        assert!(close(a, 1.001956947162427, 1e-15));
        let one_minus = DefinedReal::ONE - gamma_n(GammaFormula::Linear, 4, u).unwrap();
        assert!(((a * one_minus) - DefinedReal::ONE).abs() < 2f64.powi(-100));
        assert_eq!(
            alpha_n(GammaFormula::Linear, 3, DefinedReal::ZERO).unwrap(),
            1.0
        );
    }

    #[test]
    fn u_prime_cases() {
        let u = DefinedReal::pow2(-24);
        assert_eq!(u_prime(u, DefinedReal::pow2(-53)), u);
        assert_eq!(u_prime(u, u), u);
        assert!(u_prime(DefinedReal::ZERO, DefinedReal::ZERO).is_zero());
        let got = u_prime(u, DefinedReal::pow2(-11));
        let want = 2f64.powi(-24) + 2f64.powi(-11) + 2f64.powi(-35);
        assert_eq!(got, DefinedReal::from(want));
    }

    #[test]
    fn lambda_values() {
        let up = DefinedReal::from(0.001);
        assert_eq!(lambda_k(DefinedReal::ZERO, up), up);
        assert!(close(lambda_k(DefinedReal::ONE, up), 0.002, 1e-15));
        let l = lambda_k(DefinedReal::from(2047.0), DefinedReal::from(U11));
        assert_eq!(l, 1.0);
    }

    #[test]
    fn mu_reduces_to_omega_without_rounding() {
        let ctx = ErrorContext::exact(7, &FormatStack::default());
        let w = DefinedReal::from(0.123);
        let l = lambda_k(DefinedReal::from(50.0), u_prime(ctx.u(0), ctx.u(0)));
        assert_eq!(ctx.mu_k(0, w, l), w);
    }

    #[test]
    fn mu_surviving_term() {
        let ctx = ErrorContext::new(4, GammaFormula::Linear, &FormatStack::default()).unwrap();
        let b = ctx.at(0);
        let mu = mu_from_parts(
            DefinedReal::ZERO,
            b.alpha_n1,
            b.gamma_n1,
            DefinedReal::ZERO,
            DefinedReal::ZERO,
        );
        assert_eq!(mu, b.gamma_n1 * b.alpha_n1);
    }

    #[test]
    fn stopping_threshold_values() {
        let eps = DefinedReal::from(1.5e-8);
        assert_eq!(
            stopping_threshold(eps, DefinedReal::ZERO, DefinedReal::ZERO),
            eps
        );
        let b = beta_n(GammaFormula::Linear, 4, DefinedReal::from(U11)).unwrap();
        let t = stopping_threshold(eps, DefinedReal::from(0.2), b);
        assert!(close(t, 1.5e-8 / (1.2 * (1.0 + b.to_f64())), 1e-15));
    }

    #[test]
    fn context_rejects_large_dimension() {
        let s = FormatStack::default();
        assert!(ErrorContext::new(2045, GammaFormula::Linear, &s).is_ok());
        assert!(matches!(
            ErrorContext::new(2046, GammaFormula::Linear, &s),
            Err(BoundError::DimensionTooLarge { .. })
        ));
    }

    #[test]
    fn phi_examples() {
        let ctx = ErrorContext::exact(2, &FormatStack::default());
        let x = TaggedValue::new(3.0, FpFormat::DOUBLE).unwrap();
        let s = TaggedValue::new(2.0, FpFormat::DOUBLE).unwrap();
        assert_eq!(ctx.phi_bound(x, s).unwrap(), 1.5);
        let z = TaggedValue::new(0.0, FpFormat::DOUBLE).unwrap();
        assert_eq!(ctx.phi_bound(x, z), Err(BoundError::DegenerateStep));
    }

    #[test]
    fn formula_parsing() {
        assert_eq!("nu".parse::<GammaFormula>().unwrap(), GammaFormula::Linear);
        assert_eq!(
            "nu/(1-nu/2)".parse::<GammaFormula>().unwrap(),
            GammaFormula::Halved
        );
        assert!("bogus".parse::<GammaFormula>().is_err());
    }
}
