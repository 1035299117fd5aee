//! Format rounding against independent references.

use half::f16;
use proptest::prelude::*;

use mpr2::fpenv::{fp_op, FpFormat, Op, TaggedValue};

/// Every finite nonnegative half value, ascending.
fn half_grid() -> Vec<f64> {
    (0u16..0x7c00).map(|b| f16::from_bits(b).to_f64()).collect()
}

/// Round to nearest, ties to the value with an even significand, by search.
fn brute_half(grid: &[f64], x: f64) -> Option<f64> {
    let a = x.abs();
    let max = *grid.last().unwrap();
    let ulp_max = max - grid[grid.len() - 2];
    if a >= max + ulp_max / 2.0 {
        return None;
    }
    let i = grid.partition_point(|&v| v < a);
    let r = if i == grid.len() {
        max
    } else if grid[i] == a || i == 0 {
        grid[i]
    } else {
        let (lo, hi) = (grid[i - 1], grid[i]);
        match (a - lo).partial_cmp(&(hi - a)).unwrap() {
            std::cmp::Ordering::Less => lo,
            std::cmp::Ordering::Greater => hi,
            std::cmp::Ordering::Equal => {
                if (i - 1) % 2 == 0 {
                    lo
                } else {
                    hi
                }
            }
        }
    };
    Some(r.copysign(x))
}

#[test]
fn half_matches_brute_force_on_midpoints() {
    let grid = half_grid();
    for w in grid.windows(2) {
        for x in [
            w[0],
            (w[0] + w[1]) / 2.0,
            w[0] + (w[1] - w[0]) * 0.25,
            w[0] + (w[1] - w[0]) * 0.75,
        ] {
            for s in [x, -x] {
                let got = FpFormat::HALF.round_nearest(s).ok().map(|r| r.value);
                assert_eq!(got, brute_half(&grid, s), "x = {s:e}");
            }
        }
    }
}

#[test]
fn half_rounds_once_from_binary64() {
    // just below the midpoint of 20208 and 20224
    let grid = half_grid();
    let x = -20215.99921426137;
    assert_eq!(FpFormat::HALF.round_nearest(x).unwrap().value, -20208.0);
    assert_eq!(brute_half(&grid, x), Some(-20208.0));
}

#[test]
fn half_overflow_threshold() {
    assert_eq!(
        FpFormat::HALF.round_nearest(65519.99).unwrap().value,
        65504.0
    );
    assert!(FpFormat::HALF.round_nearest(65520.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20_000))]

    #[test]
    fn half_matches_reference_crate(x in -70000.0f64..70000.0, k in -30i32..0) {
        // f16::from_f64 rounds through binary32, so only binary32 inputs are
        // comparable
        let x = (x * 2f64.powi(k / 3)) as f32;
        let ours = FpFormat::HALF.round_nearest(x as f64).ok().map(|r| r.value);
        let theirs = f16::from_f32(x).to_f64();
        match ours {
            Some(v) => prop_assert_eq!(v, theirs),
            None => prop_assert!(theirs.is_infinite()),
        }
    }

    #[test]
    fn single_matches_native_cast(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let native = x as f32;
        let ours = FpFormat::SINGLE.round_nearest(x).ok().map(|r| r.value);
        match ours {
            Some(v) => prop_assert_eq!(v, native as f64),
            None => prop_assert!(native.is_infinite()),
        }
    }

    #[test]
    fn half_ops_match_reference(a in -300.0f64..300.0, b in -300.0f64..300.0) {
        let (ha, hb) = (f16::from_f64(a), f16::from_f64(b));
        let ta = TaggedValue::new(ha.to_f64(), FpFormat::HALF).unwrap();
        let tb = TaggedValue::new(hb.to_f64(), FpFormat::HALF).unwrap();
        // the reference computes in f64 then rounds once, exact for + - * here
        for (op, want) in [
            (Op::Add, ha.to_f64() + hb.to_f64()),
            (Op::Sub, ha.to_f64() - hb.to_f64()),
            (Op::Mul, ha.to_f64() * hb.to_f64()),
        ] {
            let got = fp_op(ta, tb, op).ok().map(|r| r.value.value());
            let want = f16::from_f64(want).to_f64();
            match got {
                Some(v) => prop_assert_eq!(v, want),
                None => prop_assert!(want.is_infinite()),
            }
        }
    }
}
