mod common;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use proptest::prelude::*;

use common::*;
use mpr2::evalmodel::{eval_gradient, eval_objective, rat, ErrorMode};
use mpr2::fpenv::{FpFormat, TaggedVector};
use mpr2::problems::{default_suite, exact_eval, exact_grad};

fn offset_point(x0: &[f64], offs: &[f64], fmt: FpFormat) -> Option<TaggedVector> {
    let v: Option<Vec<f64>> = x0
        .iter()
        .zip(offs.iter().cycle())
        .map(|(&a, &d)| fmt.round_nearest(a + d).ok().map(|r| r.value))
        .collect();
    TaggedVector::new(v?, fmt).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn guaranteed_objective_contains_exact_value(
        which in 0usize..28,
        offs in prop::collection::vec(-0.5f64..0.5, 1..8),
        fi in 0usize..3,
    ) {
        let suite = default_suite();
        let p = &suite[which % suite.len()];
        let fmt = FORMATS[fi];
        let Some(x) = offset_point(p.x0(), &offs, fmt) else { return Ok(()) };
        let Ok(e) = eval_objective(p, &x, fmt, ErrorMode::Guaranteed) else { return Ok(()) };
        let xr: Vec<BigRational> = x.values().iter().map(|&v| rat(v)).collect();
        let exact = exact_eval(p, &xr).unwrap();
        let f = rat(e.value.value());
        let w = defined_rat(e.omega);
        prop_assert!(&f - &w <= exact.lo && exact.hi <= &f + &w, "{}", p.name());
    }

    #[test]
    fn guaranteed_gradient_radius_holds(
        which in 0usize..28,
        offs in prop::collection::vec(-0.5f64..0.5, 1..8),
        fi in 0usize..3,
    ) {
        let suite = default_suite();
        let p = &suite[which % suite.len()];
        let fmt = FORMATS[fi];
        let Some(x) = offset_point(p.x0(), &offs, fmt) else { return Ok(()) };
        let Ok(e) = eval_gradient(p, &x, fmt, ErrorMode::Guaranteed) else { return Ok(()) };
        let xr: Vec<BigRational> = x.values().iter().map(|&v| rat(v)).collect();
        let g = exact_grad(p, &xr).unwrap();
        // squared distance to the farthest point of each component's enclosure
        let d2 = g.iter().zip(e.value.values()).fold(BigRational::zero(), |acc, (iv, &gi)| {
            let gi = rat(gi);
            let a = (&iv.lo - &gi).abs().max((&iv.hi - &gi).abs());
            acc + &a * &a
        });
        let r = defined_rat(e.radius);
        prop_assert!(d2 <= &r * &r, "{}", p.name());
    }
}

#[test]
fn dot_and_norm_bounds_small_sample() {
    dot_norm_bounds(300, 11).unwrap();
}

#[test]
fn step_bounds_small_sample() {
    step_bounds(200, 12).unwrap();
}

#[test]
fn mu_collapses_to_omega() {
    mu_degeneration(2_000, 13).unwrap();
}

#[test]
fn fixture_profile_through_library() {
    use mpr2::harness::{cost_matrix_from_runs_csv, performance_profile};
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("runs.csv");
    std::fs::write(&path, FIXTURE).unwrap();
    let data = performance_profile(&cost_matrix_from_runs_csv(&path).unwrap());
    assert_eq!(data.problems_used, 3);
    for (s, fr) in data.solvers.iter().zip(&data.fractions) {
        for (&tau, &f) in data.taus.iter().zip(fr) {
            assert_eq!(f, fixture_expected(s, tau), "{s} at {tau}");
        }
    }
}
