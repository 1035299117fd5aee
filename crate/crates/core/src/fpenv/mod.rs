//! Emulated IEEE-754 arithmetic over a stack of binary formats.
//!
//! Every operation is carried out in binary64 and rounded once to the target
//! format. For `+ - * / sqrt` this equals direct rounding whenever the target
//! precision `p` satisfies `53 >= 2p + 2`, which holds for half and single.
//! Binary64 itself is native.

mod format;
mod tagged;

pub use format::{FormatStack, FpFormat, Rounding};
pub(crate) use tagged::dot_slices;
pub use tagged::{
    cast, fp_dot, fp_dot_in, fp_norm, fp_norm_in, fp_op, fp_sqrt, round_defined, round_to_format,
    Op, Rounded, TaggedValue, TaggedVector,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FpError {
    #[error("overflow")]
    Overflow,
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of a negative number")]
    NegativeSqrt,
    #[error("operand is not finite")]
    NotFinite,
    #[error("vector lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("value {0} is not representable in {1}")]
    NotRepresentable(f64, &'static str),
    #[error("format {0} does not fit inside binary64")]
    UnsupportedFormat(&'static str),
    #[error("format stack is empty")]
    EmptyStack,
    #[error("format stack must be strictly increasing in precision")]
    UnorderedStack,
}

/// Exact `2^e` for `e` in the binary64 range (subnormals included).
pub fn pow2(e: i32) -> f64 {
    if e >= -1022 {
        assert!(e <= 1023, "2^{e} overflows binary64");
        f64::from_bits(((e + 1023) as u64) << 52)
    } else {
        assert!(e >= -1074, "2^{e} underflows binary64");
        f64::from_bits(1u64 << (e + 1074))
    }
}

/// `floor(log2 |x|)` for finite nonzero `x`.
pub(crate) fn exponent(x: f64) -> i32 {
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    if biased == 0 {
        let m = bits & ((1u64 << 52) - 1);
        -1074 + (63 - m.leading_zeros() as i32)
    } else {
        biased - 1023
    }
}

/// Sign of `exact - computed` for a binary64 operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Residual {
    Exact,
    Above,
    Below,
    Unknown,
}

impl Residual {
    fn from_sign(r: f64) -> Self {
        if r > 0.0 {
            Residual::Above
        } else if r < 0.0 {
            Residual::Below
        } else {
            Residual::Exact
        }
    }
}

// Below this magnitude FMA residuals may themselves underflow.
const RESIDUAL_FLOOR: f64 = 2.004168360008973e-292; // 2^-968

/// Binary64 result of `a op b` and the direction of its rounding error.
pub(crate) fn op_with_residual(op: Op, a: f64, b: f64) -> Result<(f64, Residual), FpError> {
    let (q, res) = match op {
        Op::Add | Op::Sub => {
            let b = if op == Op::Sub { -b } else { b };
            let s = a + b;
            let bb = s - a;
            let e = (a - (s - bb)) + (b - bb);
            (s, Residual::from_sign(e))
        }
        Op::Mul => {
            let p = a * b;
            if p.abs() < RESIDUAL_FLOOR && a != 0.0 && b != 0.0 {
                (p, Residual::Unknown)
            } else {
                (p, Residual::from_sign(a.mul_add(b, -p)))
            }
        }
        Op::Div => {
            if b == 0.0 {
                return Err(FpError::DivisionByZero);
            }
            let q = a / b;
            if a != 0.0 && (q.abs() < RESIDUAL_FLOOR || a.abs() < RESIDUAL_FLOOR) {
                (q, Residual::Unknown)
            } else {
                let r = (-q).mul_add(b, a);
                let r = if b < 0.0 { -r } else { r };
                (q, Residual::from_sign(r))
            }
        }
    };
    if !q.is_finite() {
        return Err(FpError::Overflow);
    }
    Ok((q, res))
}

pub(crate) fn sqrt_with_residual(a: f64) -> Result<(f64, Residual), FpError> {
    if a < 0.0 {
        return Err(FpError::NegativeSqrt);
    }
    if a.is_infinite() {
        return Err(FpError::Overflow);
    }
    let s = a.sqrt();
    if a != 0.0 && a < RESIDUAL_FLOOR {
        return Ok((s, Residual::Unknown));
    }
    Ok((s, Residual::from_sign((-s).mul_add(s, a))))
}

/// Tightest pair of `fmt` values bracketing the real `q + residual`.
pub(crate) fn enclose(q: f64, res: Residual, fmt: &FpFormat) -> Result<(f64, f64), FpError> {
    let y = fmt.round_nearest(q)?.value;
    if y > q {
        return Ok((fmt.next_down(y)?, y));
    }
    if y < q {
        return Ok((y, fmt.next_up(y)?));
    }
    match res {
        Residual::Exact => Ok((y, y)),
        Residual::Above => Ok((y, fmt.next_up(y)?)),
        Residual::Below => Ok((fmt.next_down(y)?, y)),
        Residual::Unknown => Ok((fmt.next_down(y)?, fmt.next_up(y)?)),
    }
}

/// `fl(a op b)` in `fmt`, operands already representable in `fmt`.
#[inline]
pub(crate) fn apply(op: Op, a: f64, b: f64, fmt: &FpFormat) -> Result<Rounding, FpError> {
    let q = match op {
        Op::Add => a + b,
        Op::Sub => a - b,
        Op::Mul => a * b,
        Op::Div => {
            if b == 0.0 {
                return Err(FpError::DivisionByZero);
            }
            a / b
        }
    };
    if fmt.is_native() {
        if !q.is_finite() {
            return Err(FpError::Overflow);
        }
        let tiny =
            q.abs() < f64::MIN_POSITIVE && (q != 0.0 || (op == Op::Mul && a != 0.0 && b != 0.0));
        return Ok(Rounding {
            value: q,
            inexact: tiny,
            tiny,
        });
    }
    fmt.round_nearest(q)
}

#[inline]
pub(crate) fn apply_sqrt(a: f64, fmt: &FpFormat) -> Result<Rounding, FpError> {
    if a < 0.0 {
        return Err(FpError::NegativeSqrt);
    }
    fmt.round_nearest(a.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow2_covers_subnormals() {
        assert_eq!(pow2(0), 1.0);
        assert_eq!(pow2(-1074), f64::from_bits(1));
        assert_eq!(pow2(-1023), f64::MIN_POSITIVE / 2.0);
        assert_eq!(pow2(1023), 2f64.powi(1023));
    }

    #[test]
    fn exponent_matches_log2() {
        for x in [1.0, 1.5, 0.75, 1024.0, 3e-310, -7.0, 6.103515625e-5] {
            assert_eq!(exponent(x), x.abs().log2().floor() as i32, "{x}");
        }
    }

    #[test]
    fn residual_signs() {
        let (q, r) = op_with_residual(Op::Add, 1.0, 2f64.powi(-60)).unwrap();
        assert_eq!(q, 1.0);
        assert_eq!(r, Residual::Above);
        let (_, r) = op_with_residual(Op::Div, 1.0, 3.0).unwrap();
        // 1/3 in binary64 is below the true value
        assert_eq!(r, Residual::Above);
        let (_, r) = op_with_residual(Op::Div, 1.0, -3.0).unwrap();
        assert_eq!(r, Residual::Below);
        let (_, r) = sqrt_with_residual(2.0).unwrap();
        assert_ne!(r, Residual::Exact);
        let (_, r) = op_with_residual(Op::Mul, 3.0, 5.0).unwrap();
        assert_eq!(r, Residual::Exact);
    }

    #[test]
    fn enclose_brackets_nearest() {
        let h = FpFormat::HALF;
        // 1 + 2^-12 lies between 1 and 1 + 2^-10
        let (lo, hi) = enclose(1.0 + 2f64.powi(-12), Residual::Exact, &h).unwrap();
        assert_eq!((lo, hi), (1.0, 1.0 + 2f64.powi(-10)));
        let (lo, hi) = enclose(3.0, Residual::Exact, &h).unwrap();
        assert_eq!((lo, hi), (3.0, 3.0));
        let (lo, hi) = enclose(3.0, Residual::Below, &h).unwrap();
        assert_eq!(hi, 3.0);
        assert_eq!(lo, 3.0 - 2f64.powi(-9));
    }
}
