use serde::Serialize;

use crate::expr::Arithmetic;
use crate::fpenv::{
    enclose, op_with_residual, sqrt_with_residual, FpError, FpFormat, Op, Residual,
};

/// Closed interval with endpoints representable in some format.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Largest distance from `x` to an endpoint.
    pub fn max_dist(&self, x: f64) -> f64 {
        (x - self.lo).abs().max((self.hi - x).abs())
    }
}

/// Interval extension with outward rounding in a fixed format.
///
/// Each endpoint is produced by one binary64 operation whose rounding
/// direction is recovered from an error-free transformation; the exact result
/// is then bracketed by its two neighbours in the target format.
pub struct IntervalArith<'a> {
    fmt: FpFormat,
    x: &'a [f64],
}

impl<'a> IntervalArith<'a> {
    pub fn new(fmt: FpFormat, x: &'a [f64]) -> Self {
        Self { fmt, x }
    }

    fn bracket(&self, op: Op, a: f64, b: f64) -> Result<(f64, f64), FpError> {
        let (q, res) = op_with_residual(op, a, b)?;
        enclose(q, res, &self.fmt)
    }

    fn down(&self, op: Op, a: f64, b: f64) -> Result<f64, FpError> {
        Ok(self.bracket(op, a, b)?.0)
    }

    fn up(&self, op: Op, a: f64, b: f64) -> Result<f64, FpError> {
        Ok(self.bracket(op, a, b)?.1)
    }

    fn hull(&self, op: Op, a: &Interval, b: &Interval) -> Result<Interval, FpError> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in [a.lo, a.hi] {
            for y in [b.lo, b.hi] {
                let (l, h) = self.bracket(op, x, y)?;
                lo = lo.min(l);
                hi = hi.max(h);
            }
        }
        Ok(Interval { lo, hi })
    }

    fn pow_down(&self, a: f64, k: u32) -> Result<f64, FpError> {
        let mut acc = a;
        for _ in 1..k {
            acc = self.down(Op::Mul, acc, a)?;
        }
        Ok(acc)
    }

    fn pow_up(&self, a: f64, k: u32) -> Result<f64, FpError> {
        let mut acc = a;
        for _ in 1..k {
            acc = self.up(Op::Mul, acc, a)?;
        }
        Ok(acc)
    }
}

impl Arithmetic for IntervalArith<'_> {
    type Value = Interval;

    fn input(&self, i: usize) -> Result<Interval, FpError> {
        self.constant(self.x[i])
    }

    fn constant(&self, c: f64) -> Result<Interval, FpError> {
        let (lo, hi) = enclose(c, Residual::Exact, &self.fmt)?;
        Ok(Interval { lo, hi })
    }

    fn add(&self, a: &Interval, b: &Interval) -> Result<Interval, FpError> {
        Ok(Interval {
            lo: self.down(Op::Add, a.lo, b.lo)?,
            hi: self.up(Op::Add, a.hi, b.hi)?,
        })
    }

    fn sub(&self, a: &Interval, b: &Interval) -> Result<Interval, FpError> {
        Ok(Interval {
            lo: self.down(Op::Sub, a.lo, b.hi)?,
            hi: self.up(Op::Sub, a.hi, b.lo)?,
        })
    }

    fn mul(&self, a: &Interval, b: &Interval) -> Result<Interval, FpError> {
        self.hull(Op::Mul, a, b)
    }

    fn div(&self, a: &Interval, b: &Interval) -> Result<Interval, FpError> {
        if b.contains_zero() {
            return Err(FpError::DivisionByZero);
        }
        self.hull(Op::Div, a, b)
    }

    fn neg(&self, a: &Interval) -> Result<Interval, FpError> {
        Ok(Interval {
            lo: -a.hi,
            hi: -a.lo,
        })
    }

    fn sqrt(&self, a: &Interval) -> Result<Interval, FpError> {
        if a.hi < 0.0 {
            return Err(FpError::NegativeSqrt);
        }
        // the exact argument is assumed to lie in the domain
        let lo = if a.lo <= 0.0 {
            0.0
        } else {
            let (q, res) = sqrt_with_residual(a.lo)?;
            enclose(q, res, &self.fmt)?.0
        };
        let (q, res) = sqrt_with_residual(a.hi)?;
        let hi = enclose(q, res, &self.fmt)?.1;
        Ok(Interval { lo, hi })
    }

    fn powi(&self, a: &Interval, k: u32) -> Result<Interval, FpError> {
        if k == 0 {
            return Ok(Interval::point(1.0));
        }
        if k == 1 {
            return Ok(*a);
        }
        if k % 2 == 0 {
            let m_hi = a.lo.abs().max(a.hi.abs());
            let m_lo = if a.contains_zero() {
                0.0
            } else {
                a.lo.abs().min(a.hi.abs())
            };
            return Ok(Interval {
                lo: self.pow_down(m_lo, k)?,
                hi: self.pow_up(m_hi, k)?,
            });
        }
        let lo = if a.lo >= 0.0 {
            self.pow_down(a.lo, k)?
        } else {
            -self.pow_up(-a.lo, k)?
        };
        let hi = if a.hi >= 0.0 {
            self.pow_up(a.hi, k)?
        } else {
            -self.pow_down(-a.hi, k)?
        };
        Ok(Interval { lo, hi })
    }
}
