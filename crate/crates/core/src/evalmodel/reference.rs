//! Reference backends: double-double evaluation and exact rational
//! enclosures used as oracles.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::defined::DefinedReal;
use crate::expr::Arithmetic;
use crate::fpenv::FpError;

/// Evaluation in [`DefinedReal`] arithmetic.
pub struct DefinedArith<'a> {
    x: &'a [f64],
}

impl<'a> DefinedArith<'a> {
    pub fn new(x: &'a [f64]) -> Self {
        Self { x }
    }
}

impl Arithmetic for DefinedArith<'_> {
    type Value = DefinedReal;

    fn input(&self, i: usize) -> Result<DefinedReal, FpError> {
        Ok(DefinedReal::from(self.x[i]))
    }
    fn constant(&self, c: f64) -> Result<DefinedReal, FpError> {
        Ok(DefinedReal::from(c))
    }
    fn add(&self, a: &DefinedReal, b: &DefinedReal) -> Result<DefinedReal, FpError> {
        finite(*a + *b)
    }
    fn sub(&self, a: &DefinedReal, b: &DefinedReal) -> Result<DefinedReal, FpError> {
        finite(*a - *b)
    }
    fn mul(&self, a: &DefinedReal, b: &DefinedReal) -> Result<DefinedReal, FpError> {
        finite(*a * *b)
    }
    fn div(&self, a: &DefinedReal, b: &DefinedReal) -> Result<DefinedReal, FpError> {
        if b.is_zero() {
            return Err(FpError::DivisionByZero);
        }
        finite(*a / *b)
    }
    fn neg(&self, a: &DefinedReal) -> Result<DefinedReal, FpError> {
        Ok(-*a)
    }
    fn sqrt(&self, a: &DefinedReal) -> Result<DefinedReal, FpError> {
        if a.is_sign_negative() && !a.is_zero() {
            return Err(FpError::NegativeSqrt);
        }
        Ok(a.sqrt())
    }
    fn powi(&self, a: &DefinedReal, k: u32) -> Result<DefinedReal, FpError> {
        finite(a.powi(k))
    }
}

fn finite(x: DefinedReal) -> Result<DefinedReal, FpError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(FpError::Overflow)
    }
}

/// Closed rational interval. Degenerate unless a square root was irrational.
#[derive(Clone, Debug, PartialEq)]
pub struct RatInterval {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl RatInterval {
    pub fn point(q: BigRational) -> Self {
        Self {
            lo: q.clone(),
            hi: q,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, q: &BigRational) -> bool {
        &self.lo <= q && q <= &self.hi
    }

    /// Largest absolute value over the interval.
    pub fn mag(&self) -> BigRational {
        self.lo.abs().max(self.hi.abs())
    }
}

pub fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

/// Exact rational evaluation; square roots of non-squares are bracketed to
/// `sqrt_bits` relative bits.
pub struct RationalArith {
    x: Vec<BigRational>,
    sqrt_bits: u32,
}

impl RationalArith {
    pub fn new(x: &[f64]) -> Self {
        Self::from_rationals(x.iter().map(|&v| rat(v)).collect())
    }

    pub fn from_rationals(x: Vec<BigRational>) -> Self {
        Self { x, sqrt_bits: 200 }
    }
}

/// `lo <= sqrt(q) <= hi` with `hi - lo` about `2^-bits` relative.
pub fn sqrt_bracket(q: &BigRational, bits: u32) -> (BigRational, BigRational) {
    assert!(!q.is_negative(), "square root of a negative rational");
    if q.is_zero() {
        return (q.clone(), q.clone());
    }
    let (p, d) = (q.numer(), q.denom());
    let scale = BigInt::from(1) << (2 * bits as usize);
    let m = p * d * &scale;
    let s = m.sqrt();
    let denom = d * (BigInt::from(1) << bits as usize);
    let lo = BigRational::new(s.clone(), denom.clone());
    if &s * &s == m {
        return (lo.clone(), lo);
    }
    (lo, BigRational::new(s + 1, denom))
}

impl Arithmetic for RationalArith {
    type Value = RatInterval;

    fn input(&self, i: usize) -> Result<RatInterval, FpError> {
        Ok(RatInterval::point(self.x[i].clone()))
    }
    fn constant(&self, c: f64) -> Result<RatInterval, FpError> {
        Ok(RatInterval::point(rat(c)))
    }
    fn add(&self, a: &RatInterval, b: &RatInterval) -> Result<RatInterval, FpError> {
        Ok(RatInterval {
            lo: &a.lo + &b.lo,
            hi: &a.hi + &b.hi,
        })
    }
    fn sub(&self, a: &RatInterval, b: &RatInterval) -> Result<RatInterval, FpError> {
        Ok(RatInterval {
            lo: &a.lo - &b.hi,
            hi: &a.hi - &b.lo,
        })
    }
    fn mul(&self, a: &RatInterval, b: &RatInterval) -> Result<RatInterval, FpError> {
        if a.is_exact() && b.is_exact() {
            return Ok(RatInterval::point(&a.lo * &b.lo));
        }
        let c = [&a.lo * &b.lo, &a.lo * &b.hi, &a.hi * &b.lo, &a.hi * &b.hi];
        Ok(hull(c))
    }
    fn div(&self, a: &RatInterval, b: &RatInterval) -> Result<RatInterval, FpError> {
        if b.contains(&BigRational::zero()) {
            return Err(FpError::DivisionByZero);
        }
        if a.is_exact() && b.is_exact() {
            return Ok(RatInterval::point(&a.lo / &b.lo));
        }
        let c = [&a.lo / &b.lo, &a.lo / &b.hi, &a.hi / &b.lo, &a.hi / &b.hi];
        Ok(hull(c))
    }
    fn neg(&self, a: &RatInterval) -> Result<RatInterval, FpError> {
        Ok(RatInterval {
            lo: -&a.hi,
            hi: -&a.lo,
        })
    }
    fn sqrt(&self, a: &RatInterval) -> Result<RatInterval, FpError> {
        if a.hi.is_negative() {
            return Err(FpError::NegativeSqrt);
        }
        let lo = if a.lo.is_negative() {
            BigRational::zero()
        } else {
            sqrt_bracket(&a.lo, self.sqrt_bits).0
        };
        Ok(RatInterval {
            lo,
            hi: sqrt_bracket(&a.hi, self.sqrt_bits).1,
        })
    }
    fn powi(&self, a: &RatInterval, k: u32) -> Result<RatInterval, FpError> {
        if a.is_exact() {
            return Ok(RatInterval::point(pow(&a.lo, k)));
        }
        if k % 2 == 0 && a.contains(&BigRational::zero()) {
            return Ok(RatInterval {
                lo: BigRational::zero(),
                hi: pow(&a.mag(), k),
            });
        }
        Ok(hull([pow(&a.lo, k), pow(&a.hi, k)]))
    }
}

fn pow(q: &BigRational, k: u32) -> BigRational {
    let mut acc = BigRational::from_integer(BigInt::from(1));
    for _ in 0..k {
        acc = &acc * q;
    }
    acc
}

fn hull<const N: usize>(c: [BigRational; N]) -> RatInterval {
    let lo = c.iter().min().expect("nonempty").clone();
    let hi = c.iter().max().expect("nonempty").clone();
    RatInterval { lo, hi }
}
