use serde::{Deserialize, Serialize};

use super::{apply, apply_sqrt, FpError, FpFormat, Rounding};
use crate::defined::DefinedReal;

/// Elementary binary operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

/// A computed value together with the underflow flag raised while producing it.
#[derive(Clone, Debug, PartialEq)]
pub struct Rounded<T> {
    pub value: T,
    pub underflow: bool,
}

impl<T> Rounded<T> {
    pub fn exact(value: T) -> Self {
        Self {
            value,
            underflow: false,
        }
    }
}

/// A scalar known to be representable in its format.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TaggedValue {
    value: f64,
    fmt: FpFormat,
}

impl TaggedValue {
    /// Fails unless `value` is finite and representable in `fmt`.
    pub fn new(value: f64, fmt: FpFormat) -> Result<Self, FpError> {
        if !value.is_finite() {
            return Err(FpError::NotFinite);
        }
        if !fmt.represents(value) {
            return Err(FpError::NotRepresentable(value, fmt.name()));
        }
        Ok(Self { value, fmt })
    }

    pub(crate) fn from_rounding(r: Rounding, fmt: FpFormat) -> Rounded<Self> {
        Rounded {
            value: Self {
                value: r.value,
                fmt,
            },
            underflow: r.underflow(),
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn format(&self) -> FpFormat {
        self.fmt
    }

    pub fn to_defined(&self) -> DefinedReal {
        DefinedReal::from_f64(self.value)
    }
}

/// A vector whose entries are all representable in one format.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaggedVector {
    values: Vec<f64>,
    fmt: FpFormat,
}

impl TaggedVector {
    pub fn new(values: Vec<f64>, fmt: FpFormat) -> Result<Self, FpError> {
        for &v in &values {
            if !v.is_finite() {
                return Err(FpError::NotFinite);
            }
            if !fmt.represents(v) {
                return Err(FpError::NotRepresentable(v, fmt.name()));
            }
        }
        Ok(Self { values, fmt })
    }

    /// Caller guarantees representability.
    pub(crate) fn from_raw(values: Vec<f64>, fmt: FpFormat) -> Self {
        debug_assert!(values.iter().all(|&v| fmt.represents(v)));
        Self { values, fmt }
    }

    pub fn zeros(n: usize, fmt: FpFormat) -> Self {
        Self {
            values: vec![0.0; n],
            fmt,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn format(&self) -> FpFormat {
        self.fmt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> TaggedValue {
        TaggedValue {
            value: self.values[i],
            fmt: self.fmt,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Round a binary64 value to `fmt`.
pub fn round_to_format(x: f64, fmt: FpFormat) -> Result<Rounded<TaggedValue>, FpError> {
    let r = fmt.round_nearest(x)?;
    Ok(TaggedValue::from_rounding(r, fmt))
}

/// Round an extended-precision value to `fmt` (correctly, including ties
/// decided by the low word).
pub fn round_defined(x: DefinedReal, fmt: FpFormat) -> Result<Rounded<TaggedValue>, FpError> {
    let hi = x.hi();
    let lo = x.lo();
    let mut r = fmt.round_nearest(hi)?;
    if lo != 0.0 {
        r.inexact = true;
        if r.value != hi {
            let other = if r.value > hi {
                fmt.next_down(r.value)
            } else {
                fmt.next_up(r.value)
            };
            if let Ok(other) = other {
                if (r.value - hi).abs() == (other - hi).abs() {
                    // hi sits on a midpoint; the low word breaks the tie
                    let up = lo > 0.0;
                    r.value = if up {
                        r.value.max(other)
                    } else {
                        r.value.min(other)
                    };
                }
            }
        }
    }
    Ok(TaggedValue::from_rounding(r, fmt))
}

/// `fl(a op b)` in the finer of the two operand formats.
pub fn fp_op(a: TaggedValue, b: TaggedValue, op: Op) -> Result<Rounded<TaggedValue>, FpError> {
    let fmt = a.fmt.finer(b.fmt);
    let r = apply(op, a.value, b.value, &fmt)?;
    Ok(TaggedValue::from_rounding(r, fmt))
}

/// Correctly rounded square root in the operand's format.
pub fn fp_sqrt(a: TaggedValue) -> Result<Rounded<TaggedValue>, FpError> {
    let r = apply_sqrt(a.value, &a.fmt)?;
    Ok(TaggedValue::from_rounding(r, a.fmt))
}

/// Dot product accumulated left to right in the finer operand format.
pub fn fp_dot(x: &TaggedVector, y: &TaggedVector) -> Result<Rounded<TaggedValue>, FpError> {
    fp_dot_in(x, y, x.fmt.finer(y.fmt))
}

/// Dot product with every multiplication and addition rounded in `fmt`.
pub fn fp_dot_in(
    x: &TaggedVector,
    y: &TaggedVector,
    fmt: FpFormat,
) -> Result<Rounded<TaggedValue>, FpError> {
    if x.len() != y.len() {
        return Err(FpError::LengthMismatch(x.len(), y.len()));
    }
    let (value, underflow) = dot_slices(&x.values, &y.values, &fmt)?;
    Ok(Rounded {
        value: TaggedValue { value, fmt },
        underflow,
    })
}

pub(crate) fn dot_slices(x: &[f64], y: &[f64], fmt: &FpFormat) -> Result<(f64, bool), FpError> {
    let mut acc = 0.0;
    let mut underflow = false;
    for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
        let p = apply(Op::Mul, a, b, fmt)?;
        underflow |= p.underflow();
        if i == 0 {
            acc = p.value;
        } else {
            let s = apply(Op::Add, acc, p.value, fmt)?;
            underflow |= s.underflow();
            acc = s.value;
        }
    }
    Ok((acc, underflow))
}

/// `fl(sqrt(fl(x^T x)))` in the vector's own format.
pub fn fp_norm(x: &TaggedVector) -> Result<Rounded<TaggedValue>, FpError> {
    fp_norm_in(x, x.fmt)
}

/// Euclidean norm with every operation rounded in `fmt`. No rescaling.
pub fn fp_norm_in(x: &TaggedVector, fmt: FpFormat) -> Result<Rounded<TaggedValue>, FpError> {
    let (sq, uf) = dot_slices(&x.values, &x.values, &fmt)?;
    let r = apply_sqrt(sq, &fmt)?;
    Ok(Rounded {
        value: TaggedValue {
            value: r.value,
            fmt,
        },
        underflow: uf || r.underflow(),
    })
}

/// Convert every entry to `to`. Upcasts are exact.
pub fn cast(x: &TaggedVector, to: FpFormat) -> Result<Rounded<TaggedVector>, FpError> {
    if !x.fmt.is_finer_than(&to) {
        return Ok(Rounded::exact(TaggedVector {
            values: x.values.clone(),
            fmt: to,
        }));
    }
    let mut underflow = false;
    let mut out = Vec::with_capacity(x.len());
    for &v in &x.values {
        let r = to.round_nearest(v)?;
        underflow |= r.underflow();
        out.push(r.value);
    }
    Ok(Rounded {
        value: TaggedVector {
            values: out,
            fmt: to,
        },
        underflow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: FpFormat = FpFormat::HALF;
    const S: FpFormat = FpFormat::SINGLE;
    const D: FpFormat = FpFormat::DOUBLE;

    fn tv(v: f64, f: FpFormat) -> TaggedValue {
        TaggedValue::new(v, f).unwrap()
    }

    #[test]
    fn rounding_examples() {
        assert_eq!(round_to_format(0.5, H).unwrap().value.value(), 0.5);
        let r = round_to_format(1.0 + 2f64.powi(-12), H).unwrap();
        assert_eq!(r.value.value(), 1.0);
        assert!(!r.underflow);
        assert_eq!(round_to_format(98304.0, H), Err(FpError::Overflow));
        assert_eq!(round_to_format(65504.0, H).unwrap().value.value(), 65504.0);
        // 65520 is the midpoint to the next (absent) binade value: overflows
        assert_eq!(round_to_format(65520.0, H), Err(FpError::Overflow));
    }

    #[test]
    fn underflow_flag() {
        let r = round_to_format(2f64.powi(-30), H).unwrap();
        assert_eq!(r.value.value(), 0.0);
        assert!(r.underflow);
        // exact subnormal is not an underflow
        let r = round_to_format(2f64.powi(-24), H).unwrap();
        assert_eq!(r.value.value(), 2f64.powi(-24));
        assert!(!r.underflow);
    }

    #[test]
    fn mixed_operations() {
        let r = fp_op(tv(1.0, H), tv(1.0, H), Op::Add).unwrap().value;
        assert_eq!((r.value(), r.format()), (2.0, H));
        let r = fp_op(tv(1.0, H), tv(2f64.powi(-12), D), Op::Add)
            .unwrap()
            .value;
        assert_eq!((r.value(), r.format()), (1.0 + 2f64.powi(-12), D));
        let r = fp_op(tv(2048.0, H), tv(1.0, H), Op::Add).unwrap().value;
        assert_eq!(r.value(), 2048.0);
        assert_eq!(
            fp_op(tv(1.0, H), tv(0.0, H), Op::Div),
            Err(FpError::DivisionByZero)
        );
    }

    #[test]
    fn dot_and_norm() {
        let ones = TaggedVector::new(vec![1.0; 3], H).unwrap();
        assert_eq!(fp_dot(&ones, &ones).unwrap().value.value(), 3.0);
        let v = TaggedVector::new(vec![3.0, 4.0], H).unwrap();
        assert_eq!(fp_dot(&v, &v).unwrap().value.value(), 25.0);
        assert_eq!(fp_norm(&v).unwrap().value.value(), 5.0);
        let z = TaggedVector::zeros(5, S);
        assert_eq!(fp_norm(&z).unwrap().value.value(), 0.0);
        let big = TaggedVector::new(vec![300.0, 300.0], H).unwrap();
        assert_eq!(fp_norm(&big), Err(FpError::Overflow));
    }

    #[test]
    fn casts() {
        let x = TaggedVector::new(vec![0.1f32 as f64, -3.5], S).unwrap();
        let up = cast(&x, D).unwrap().value;
        assert_eq!(up.values(), x.values());
        let x = TaggedVector::new(vec![1.0 + 2f64.powi(-20)], D).unwrap();
        assert_eq!(cast(&x, H).unwrap().value.values(), &[1.0]);
        let x = TaggedVector::new(vec![70000.0], D).unwrap();
        assert_eq!(cast(&x, H), Err(FpError::Overflow));
    }

    #[test]
    fn defined_rounding_breaks_ties_with_low_word() {
        // 1 + 2^-11 is the half midpoint between 1 and 1 + 2^-10
        let mid = 1.0 + 2f64.powi(-11);
        let up = DefinedReal::from_parts(mid, 2f64.powi(-70));
        let down = DefinedReal::from_parts(mid, -(2f64.powi(-70)));
        assert_eq!(
            round_defined(up, H).unwrap().value.value(),
            1.0 + 2f64.powi(-10)
        );
        assert_eq!(round_defined(down, H).unwrap().value.value(), 1.0);
        assert_eq!(
            round_defined(DefinedReal::from(mid), H)
                .unwrap()
                .value
                .value(),
            1.0
        );
    }

    #[test]
    fn rejects_unrepresentable() {
        assert!(TaggedValue::new(0.1, H).is_err());
        assert!(TaggedVector::new(vec![1.0, f64::NAN], D).is_err());
    }
}
