use std::fmt;

use serde::Serialize;

use super::{exponent, pow2, FpError};
use crate::defined::DefinedReal;

/// A binary floating-point format with round-to-nearest-even semantics.
///
/// Values of every supported format are stored in an `f64`; the format only
/// restricts which doubles are legal and how results are rounded. Formats
/// must therefore fit inside binary64.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FpFormat {
    name: &'static str,
    bits: u32,
    precision: u32,
    emin: i32,
    emax: i32,
}

impl FpFormat {
    pub const HALF: FpFormat = FpFormat {
        name: "half",
        bits: 16,
        precision: 11,
        emin: -14,
        emax: 15,
    };
    pub const SINGLE: FpFormat = FpFormat {
        name: "single",
        bits: 32,
        precision: 24,
        emin: -126,
        emax: 127,
    };
    pub const DOUBLE: FpFormat = FpFormat {
        name: "double",
        bits: 64,
        precision: 53,
        emin: -1022,
        emax: 1023,
    };
    pub const BFLOAT16: FpFormat = FpFormat {
        name: "bfloat16",
        bits: 16,
        precision: 8,
        emin: -126,
        emax: 127,
    };

    /// Custom format. `precision` counts the hidden bit.
    pub fn new(
        name: &'static str,
        bits: u32,
        precision: u32,
        emin: i32,
        emax: i32,
    ) -> Result<Self, FpError> {
        let f = FpFormat {
            name,
            bits,
            precision,
            emin,
            emax,
        };
        let native = f.is_native();
        if precision < 2
            || precision > 53
            || emax > 1023
            || emin >= emax
            || (!native && emin - precision as i32 + 1 < -1022)
        {
            return Err(FpError::UnsupportedFormat(name));
        }
        Ok(f)
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Storage width, used by the effort model.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn emin(&self) -> i32 {
        self.emin
    }

    pub fn emax(&self) -> i32 {
        self.emax
    }

    /// `2^-p`.
    pub fn unit_roundoff(&self) -> DefinedReal {
        DefinedReal::pow2(-(self.precision as i32))
    }

    /// `2^(1-p)`.
    pub fn machine_epsilon(&self) -> DefinedReal {
        DefinedReal::pow2(1 - self.precision as i32)
    }

    pub fn max_finite(&self) -> f64 {
        let p = self.precision as i32;
        (pow2(p) - 1.0) * pow2(self.emax - p + 1)
    }

    pub fn min_normal(&self) -> f64 {
        pow2(self.emin)
    }

    pub fn min_subnormal(&self) -> f64 {
        pow2(self.emin - self.precision as i32 + 1)
    }

    pub(crate) fn is_native(&self) -> bool {
        self.precision == 53 && self.emin == -1022 && self.emax == 1023
    }

    /// True when `self` carries more significand bits than `other`.
    pub fn is_finer_than(&self, other: &FpFormat) -> bool {
        self.precision > other.precision
    }

    /// The more precise of two formats (the target of a mixed operation).
    pub fn finer(self, other: FpFormat) -> FpFormat {
        if other.is_finer_than(&self) {
            other
        } else {
            self
        }
    }

    /// Whether `x` is exactly representable.
    pub fn represents(&self, x: f64) -> bool {
        match self.round_nearest(x) {
            Ok(r) => r.value == x && !(x.is_nan()),
            Err(_) => false,
        }
    }

    /// Round-to-nearest, ties-to-even. Overflow is an error; tininess and
    /// inexactness are reported so the caller can raise an underflow flag.
    pub fn round_nearest(&self, x: f64) -> Result<Rounding, FpError> {
        if x.is_nan() {
            return Err(FpError::NotFinite);
        }
        if x.is_infinite() {
            return Err(FpError::Overflow);
        }
        if x == 0.0 {
            return Ok(Rounding {
                value: x,
                inexact: false,
                tiny: false,
            });
        }
        if self.is_native() {
            return Ok(Rounding {
                value: x,
                inexact: false,
                tiny: x.abs() < f64::MIN_POSITIVE,
            });
        }
        let e = exponent(x).max(self.emin);
        let q = e - (self.precision as i32 - 1);
        let scaled = x * pow2(-q);
        let r = scaled.round_ties_even();
        let value = r * pow2(q);
        if value.abs() > self.max_finite() {
            return Err(FpError::Overflow);
        }
        Ok(Rounding {
            value,
            inexact: r != scaled,
            tiny: x.abs() < self.min_normal(),
        })
    }

    /// Smallest representable value strictly greater than `y`.
    pub fn next_up(&self, y: f64) -> Result<f64, FpError> {
        if self.is_native() {
            let r = y.next_up();
            return if r.is_finite() {
                Ok(r)
            } else {
                Err(FpError::Overflow)
            };
        }
        if y == 0.0 {
            return Ok(self.min_subnormal());
        }
        if y < 0.0 {
            return self.next_down(-y).map(|v| -v);
        }
        let e = exponent(y).max(self.emin);
        let r = y + pow2(e - self.precision as i32 + 1);
        if r > self.max_finite() {
            Err(FpError::Overflow)
        } else {
            Ok(r)
        }
    }

    /// Largest representable value strictly less than `y`.
    pub fn next_down(&self, y: f64) -> Result<f64, FpError> {
        if self.is_native() {
            let r = y.next_down();
            return if r.is_finite() {
                Ok(r)
            } else {
                Err(FpError::Overflow)
            };
        }
        if y == 0.0 {
            return Ok(-self.min_subnormal());
        }
        if y < 0.0 {
            return self.next_up(-y).map(|v| -v);
        }
        let e = exponent(y);
        let p = self.precision as i32;
        if e > self.emin && y == pow2(e) {
            Ok(y - pow2(e - p))
        } else {
            Ok(y - pow2(e.max(self.emin) - p + 1))
        }
    }
}

impl fmt::Display for FpFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

/// Result of rounding one real to a format.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rounding {
    pub value: f64,
    pub inexact: bool,
    /// Input magnitude was below the smallest normal number.
    pub tiny: bool,
}

impl Rounding {
    pub fn underflow(&self) -> bool {
        self.tiny && self.inexact
    }
}

/// Formats available to the solver, ordered from the lowest precision
/// (index 0) to the highest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FormatStack {
    formats: Vec<FpFormat>,
}

impl FormatStack {
    pub fn new(formats: Vec<FpFormat>) -> Result<Self, FpError> {
        if formats.is_empty() {
            return Err(FpError::EmptyStack);
        }
        if formats.windows(2).any(|w| !w[1].is_finer_than(&w[0])) {
            return Err(FpError::UnorderedStack);
        }
        Ok(Self { formats })
    }

    /// Only binary64.
    pub fn double_only() -> Self {
        Self {
            formats: vec![FpFormat::DOUBLE],
        }
    }

    pub fn len(&self) -> usize {
        self.formats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formats.is_empty()
    }

    pub fn get(&self, index: usize) -> FpFormat {
        self.formats[index]
    }

    pub fn top_index(&self) -> usize {
        self.formats.len() - 1
    }

    pub fn top(&self) -> FpFormat {
        self.formats[self.top_index()]
    }

    pub fn lowest(&self) -> FpFormat {
        self.formats[0]
    }

    pub fn index_of(&self, fmt: FpFormat) -> Option<usize> {
        self.formats.iter().position(|f| *f == fmt)
    }

    pub fn iter(&self) -> impl Iterator<Item = &FpFormat> {
        self.formats.iter()
    }

    /// Largest unit roundoff in the stack.
    pub fn u_max(&self) -> DefinedReal {
        self.lowest().unit_roundoff()
    }

    /// Smallest unit roundoff in the stack.
    pub fn u_min(&self) -> DefinedReal {
        self.top().unit_roundoff()
    }

    /// Lowest index whose format represents every entry of `x` exactly.
    pub fn lowest_containing(&self, x: &[f64]) -> Option<usize> {
        (0..self.len()).find(|&i| x.iter().all(|&v| self.formats[i].represents(v)))
    }
}

impl Default for FormatStack {
    /// half, single, double.
    fn default() -> Self {
        Self {
            formats: vec![FpFormat::HALF, FpFormat::SINGLE, FpFormat::DOUBLE],
        }
    }
}
