use std::cell::Cell;

use crate::expr::Arithmetic;
use crate::fpenv::{apply, apply_sqrt, FpError, FpFormat, Op, Rounding};

/// Every operation rounded to nearest in one format. Tininess with loss of
/// accuracy sets a sticky underflow flag.
pub struct RoundedArith<'a> {
    fmt: FpFormat,
    x: &'a [f64],
    underflow: Cell<bool>,
}

impl<'a> RoundedArith<'a> {
    pub fn new(fmt: FpFormat, x: &'a [f64]) -> Self {
        Self {
            fmt,
            x,
            underflow: Cell::new(false),
        }
    }

    pub fn underflowed(&self) -> bool {
        self.underflow.get()
    }

    fn take(&self, r: Rounding) -> f64 {
        if r.underflow() {
            self.underflow.set(true);
        }
        r.value
    }

    fn op(&self, op: Op, a: f64, b: f64) -> Result<f64, FpError> {
        Ok(self.take(apply(op, a, b, &self.fmt)?))
    }
}

impl Arithmetic for RoundedArith<'_> {
    type Value = f64;

    fn input(&self, i: usize) -> Result<f64, FpError> {
        Ok(self.x[i])
    }

    fn constant(&self, c: f64) -> Result<f64, FpError> {
        Ok(self.take(self.fmt.round_nearest(c)?))
    }

    fn add(&self, a: &f64, b: &f64) -> Result<f64, FpError> {
        self.op(Op::Add, *a, *b)
    }

    fn sub(&self, a: &f64, b: &f64) -> Result<f64, FpError> {
        self.op(Op::Sub, *a, *b)
    }

    fn mul(&self, a: &f64, b: &f64) -> Result<f64, FpError> {
        self.op(Op::Mul, *a, *b)
    }

    fn div(&self, a: &f64, b: &f64) -> Result<f64, FpError> {
        self.op(Op::Div, *a, *b)
    }

    fn neg(&self, a: &f64) -> Result<f64, FpError> {
        Ok(-a)
    }

    fn sqrt(&self, a: &f64) -> Result<f64, FpError> {
        Ok(self.take(apply_sqrt(*a, &self.fmt)?))
    }
}
