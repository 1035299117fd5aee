use super::*;
use crate::expr::Expr;
use crate::problems::get_problem;
use num_traits::Signed;

const H: FpFormat = FpFormat::HALF;
const S: FpFormat = FpFormat::SINGLE;

fn sum_of_squares(n: usize) -> Problem {
    let e = Expr::build(n, |b| {
        let t = (0..n)
            .map(|i| {
                let x = b.var(i);
                b.sqr(x)
            })
            .collect();
        b.sum(t)
    });
    Problem::custom("sum_of_squares", e, vec![0.0; n])
}

fn square() -> Problem {
    let e = Expr::build(1, |b| {
        let x = b.var(0);
        b.sqr(x)
    });
    Problem::custom("square", e, vec![0.0])
}

fn tv(x: &[f64], f: FpFormat) -> TaggedVector {
    TaggedVector::new(x.to_vec(), f).unwrap()
}

#[test]
fn exact_integer_objective_has_zero_error() {
    let p = sum_of_squares(2);
    let r = eval_objective(&p, &tv(&[3.0, 4.0], H), H, ErrorMode::Guaranteed).unwrap();
    assert_eq!(r.value.value(), 25.0);
    assert!(r.omega.is_zero());
}

#[test]
fn relaxed_objective_bound() {
    let x = H.round_nearest(0.1).unwrap().value;
    let r = eval_objective(&square(), &tv(&[x], H), H, ErrorMode::Relaxed).unwrap();
    assert_eq!(r.omega, DefinedReal::from(r.value.value() * 2f64.powi(-10)));
}

#[test]
fn guaranteed_objective_contains_exact_rosenbrock() {
    let p = get_problem("rosenbrock", Some(2)).unwrap();
    let x = [1.2f32 as f64, 1.0];
    let r = eval_objective(&p, &tv(&x, S), S, ErrorMode::Guaranteed).unwrap();
    let exact = crate::problems::exact_eval(&p, &[rat(x[0]), rat(x[1])]).unwrap();
    let err = (exact.lo - rat(r.value.value())).abs();
    let omega = rat(r.omega.hi()) + rat(r.omega.lo());
    assert!(err <= omega);
    assert!(!r.omega.is_zero());
}

#[test]
fn gradient_at_stationary_point() {
    let p = get_problem("rosenbrock", Some(2)).unwrap();
    for fmt in [H, S, FpFormat::DOUBLE] {
        for mode in [ErrorMode::Guaranteed, ErrorMode::Relaxed] {
            let g = eval_gradient(&p, &tv(&[1.0, 1.0], H), fmt, mode).unwrap();
            assert!(g.value.is_zero());
            if mode == ErrorMode::Guaranteed {
                assert!(g.omega.is_zero());
            }
        }
    }
}

#[test]
fn relaxed_gradient_bound() {
    let g = eval_gradient(
        &sum_of_squares(2),
        &tv(&[1.0, 1.0], H),
        H,
        ErrorMode::Relaxed,
    )
    .unwrap();
    assert_eq!(g.value.values(), &[2.0, 2.0]);
    assert_eq!(g.omega, DefinedReal::from(2f64.powi(-10)));
}

#[test]
fn zero_gradient_with_nonzero_radius_is_reported() {
    // f = (x - 0.1)^2 at the half rounding of 0.1
    let e = Expr::build(1, |b| {
        let x = b.var(0);
        let t = b.shift(x, 0.1);
        b.sqr(t)
    });
    let p = Problem::custom("shifted", e, vec![0.0]);
    let x = H.round_nearest(0.1).unwrap().value;
    let r = eval_gradient(&p, &tv(&[x], H), H, ErrorMode::Guaranteed);
    assert!(
        matches!(r, Err(EvalError::ZeroGradientBound { .. })),
        "{r:?}"
    );
}

#[test]
fn forbidden_evaluation() {
    let x = tv(&[0.1], FpFormat::DOUBLE);
    let r = eval_objective(&square(), &x, S, ErrorMode::Relaxed);
    assert!(matches!(r, Err(EvalError::Forbidden { .. })));
}

#[test]
fn interval_examples() {
    let one = Problem::custom("one", Expr::build(1, |b| b.constant(1.0)), vec![0.0]);
    let iv = interval_extension(&one, &tv(&[5.0], H), H).unwrap();
    assert_eq!((iv.lo, iv.hi), (1.0, 1.0));

    let x = H.round_nearest(0.1).unwrap().value;
    let iv = interval_extension(&square(), &tv(&[x], H), H).unwrap();
    let exact = rat(x) * rat(x);
    assert!(rat(iv.lo) <= exact && exact <= rat(iv.hi));
    let ulp = H.next_up(iv.lo).unwrap() - iv.lo;
    assert!(iv.width() <= 2.0 * ulp);

    let recip = Problem::custom(
        "recip",
        Expr::build(1, |b| {
            let one = b.constant(1.0);
            let x = b.var(0);
            b.div(one, x)
        }),
        vec![0.0],
    );
    let r = interval_extension(&recip, &tv(&[0.0], H), H);
    assert_eq!(r, Err(EvalError::Fp(FpError::DivisionByZero)));
}

#[test]
fn relaxed_underflow_is_flagged() {
    let x = tv(&[3.0 * 2f64.powi(-13)], H);
    let r = eval_objective(&square(), &x, H, ErrorMode::Relaxed).unwrap();
    assert!(r.underflow);
    let r = eval_objective(&square(), &x, S, ErrorMode::Relaxed).unwrap();
    assert!(!r.underflow);
}
