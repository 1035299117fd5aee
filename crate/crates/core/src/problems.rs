//! Built-in unconstrained test problems.
//!
//! Every objective is an [`Expr`] over `+ - * /`, square roots and integer
//! powers. Constants are binary64 values and denote exactly that real number.
//! Start points are representable in half precision; where the textbook
//! start is not (`-1.2`), its half rounding is used instead. The list with
//! formulas lives in `PROBLEMS.md` next to this crate's manifest.

use num_rational::BigRational;
use thiserror::Error;

use crate::evalmodel::{RatInterval, RationalArith};
use crate::expr::{Builder, Expr, NodeId};
use crate::fpenv::{FpError, FpFormat};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("problem `{name}` does not accept dimension {n}")]
    BadDimension { name: String, n: usize },
    #[error(transparent)]
    Eval(#[from] FpError),
}

/// An unconstrained objective with metadata.
#[derive(Clone, Debug)]
pub struct Problem {
    name: &'static str,
    expr: Expr,
    x0: Vec<f64>,
    f_low: Option<f64>,
    lipschitz: Option<f64>,
    minimizer: Option<Vec<f64>>,
}

impl Problem {
    /// A user-defined problem without metadata.
    pub fn custom(name: &'static str, expr: Expr, x0: Vec<f64>) -> Self {
        assert_eq!(x0.len(), expr.dim());
        Self {
            name,
            expr,
            x0,
            f_low: None,
            lipschitz: None,
            minimizer: None,
        }
    }

    pub fn with_f_low(mut self, f_low: f64) -> Self {
        self.f_low = Some(f_low);
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn dim(&self) -> usize {
        self.expr.dim()
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    /// Known lower bound on `f`.
    pub fn f_low(&self) -> Option<f64> {
        self.f_low
    }

    /// Global Lipschitz constant of the gradient, when one is known.
    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    /// A point where the gradient vanishes exactly.
    pub fn minimizer(&self) -> Option<&[f64]> {
        self.minimizer.as_deref()
    }

    /// Replace the start point.
    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        assert_eq!(x0.len(), self.dim());
        self.x0 = x0;
        self
    }
}

/// Allowed dimensions of a registry entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dims {
    Fixed(usize),
    Range(usize, usize),
    Even(usize, usize),
}

impl Dims {
    fn allows(&self, n: usize) -> bool {
        match *self {
            Dims::Fixed(m) => n == m,
            Dims::Range(lo, hi) => (lo..=hi).contains(&n),
            Dims::Even(lo, hi) => (lo..=hi).contains(&n) && n % 2 == 0,
        }
    }
}

pub struct Entry {
    pub name: &'static str,
    pub dims: Dims,
    /// Dimension used by the default suite.
    pub suite_n: usize,
    build: fn(usize) -> Problem,
}

const ENTRIES: &[Entry] = &[
    Entry {
        name: "quadratic",
        dims: Dims::Range(1, 100),
        suite_n: 10,
        build: quadratic,
    },
    Entry {
        name: "offset_quadratic",
        dims: Dims::Range(1, 100),
        suite_n: 8,
        build: offset_quadratic,
    },
    Entry {
        name: "nqm",
        dims: Dims::Range(1, 100),
        suite_n: 12,
        build: nqm,
    },
    Entry {
        name: "rosenbrock",
        dims: Dims::Range(2, 100),
        suite_n: 2,
        build: rosenbrock,
    },
    Entry {
        name: "extended_rosenbrock",
        dims: Dims::Even(2, 100),
        suite_n: 10,
        build: extended_rosenbrock,
    },
    Entry {
        name: "beale",
        dims: Dims::Fixed(2),
        suite_n: 2,
        build: beale,
    },
    Entry {
        name: "himmelblau",
        dims: Dims::Fixed(2),
        suite_n: 2,
        build: himmelblau,
    },
    Entry {
        name: "booth",
        dims: Dims::Fixed(2),
        suite_n: 2,
        build: booth,
    },
    Entry {
        name: "matyas",
        dims: Dims::Fixed(2),
        suite_n: 2,
        build: matyas,
    },
    Entry {
        name: "three_hump_camel",
        dims: Dims::Fixed(2),
        suite_n: 2,
        build: three_hump_camel,
    },
    Entry {
        name: "brown_badly_scaled",
        dims: Dims::Fixed(2),
        suite_n: 2,
        build: brown_badly_scaled,
    },
    Entry {
        name: "woods",
        dims: Dims::Fixed(4),
        suite_n: 4,
        build: woods,
    },
    Entry {
        name: "powell_singular",
        dims: Dims::Fixed(4),
        suite_n: 4,
        build: powell_singular,
    },
    Entry {
        name: "trid",
        dims: Dims::Range(2, 100),
        suite_n: 6,
        build: trid,
    },
    Entry {
        name: "sqrt_smooth",
        dims: Dims::Range(1, 100),
        suite_n: 8,
        build: sqrt_smooth,
    },
    Entry {
        name: "sum_quartics",
        dims: Dims::Range(1, 100),
        suite_n: 4,
        build: sum_quartics,
    },
    Entry {
        name: "arwhead",
        dims: Dims::Range(2, 100),
        suite_n: 6,
        build: arwhead,
    },
    Entry {
        name: "zakharov",
        dims: Dims::Range(1, 100),
        suite_n: 4,
        build: zakharov,
    },
    Entry {
        name: "dixon_price",
        dims: Dims::Range(2, 100),
        suite_n: 5,
        build: dixon_price,
    },
    Entry {
        name: "bard",
        dims: Dims::Fixed(3),
        suite_n: 3,
        build: bard,
    },
    Entry {
        name: "kowalik_osborne",
        dims: Dims::Fixed(4),
        suite_n: 4,
        build: kowalik_osborne,
    },
    Entry {
        name: "penalty_i",
        dims: Dims::Range(1, 100),
        suite_n: 4,
        build: penalty_i,
    },
    Entry {
        name: "watson",
        dims: Dims::Range(2, 31),
        suite_n: 6,
        build: watson,
    },
    Entry {
        name: "linear_full_rank",
        dims: Dims::Range(1, 50),
        suite_n: 8,
        build: linear_full_rank,
    },
    Entry {
        name: "linear_rank1",
        dims: Dims::Range(1, 50),
        suite_n: 4,
        build: linear_rank1,
    },
    Entry {
        name: "chebyquad",
        dims: Dims::Range(1, 12),
        suite_n: 8,
        build: chebyquad,
    },
    Entry {
        name: "engval1",
        dims: Dims::Range(2, 100),
        suite_n: 6,
        build: engval1,
    },
    Entry {
        name: "dixmaana",
        dims: Dims::Range(3, 99),
        suite_n: 6,
        build: dixmaana,
    },
];

pub fn registry() -> &'static [Entry] {
    ENTRIES
}

pub fn problem_names() -> Vec<&'static str> {
    ENTRIES.iter().map(|e| e.name).collect()
}

/// Look up a problem; `n = None` picks the suite dimension.
pub fn get_problem(name: &str, n: Option<usize>) -> Result<Problem, ProblemError> {
    let e = ENTRIES
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| ProblemError::UnknownProblem(name.to_string()))?;
    let n = n.unwrap_or(e.suite_n);
    if !e.dims.allows(n) {
        return Err(ProblemError::BadDimension {
            name: name.to_string(),
            n,
        });
    }
    Ok((e.build)(n))
}

/// Every registry entry at its suite dimension.
pub fn default_suite() -> Vec<Problem> {
    ENTRIES.iter().map(|e| (e.build)(e.suite_n)).collect()
}

/// Exact value (an enclosure when square roots are irrational).
pub fn exact_eval(p: &Problem, x: &[BigRational]) -> Result<RatInterval, ProblemError> {
    Ok(p.expr.eval(&RationalArith::from_rationals(x.to_vec()))?)
}

/// Exact gradient by forward mode over rationals.
pub fn exact_grad(p: &Problem, x: &[BigRational]) -> Result<Vec<RatInterval>, ProblemError> {
    let (_, g) = p
        .expr
        .eval_with_gradient(&RationalArith::from_rationals(x.to_vec()))?;
    Ok(g)
}

fn half(x: f64) -> f64 {
    FpFormat::HALF
        .round_nearest(x)
        .expect("in half range")
        .value
}

fn make(
    name: &'static str,
    n: usize,
    x0: Vec<f64>,
    f_low: Option<f64>,
    lipschitz: Option<f64>,
    minimizer: Option<Vec<f64>>,
    f: impl FnOnce(&mut Builder) -> NodeId,
) -> Problem {
    Problem {
        name,
        expr: Expr::build(n, f),
        x0,
        f_low,
        lipschitz,
        minimizer,
    }
}

/// `(a - c)^2`
fn sq_shift(b: &mut Builder, a: NodeId, c: f64) -> NodeId {
    let t = b.shift(a, c);
    b.sqr(t)
}

fn quadratic(n: usize) -> Problem {
    // f = 1/2 sum i x_i^2
    make(
        "quadratic",
        n,
        vec![1.0; n],
        Some(0.0),
        Some(n as f64),
        Some(vec![0.0; n]),
        |b| {
            let terms = (0..n)
                .map(|i| {
                    let x = b.var(i);
                    let x2 = b.sqr(x);
                    b.scale((i + 1) as f64 / 2.0, x2)
                })
                .collect();
            b.sum(terms)
        },
    )
}

fn offset_centers(n: usize) -> Vec<f64> {
    (0..n).map(|i| 1.0 + (i % 4) as f64 / 4.0).collect()
}

fn offset_quadratic(n: usize) -> Problem {
    // f = 1 + sum (x_i - c_i)^2, minimum value 1
    let c = offset_centers(n);
    let cc = c.clone();
    make(
        "offset_quadratic",
        n,
        vec![0.0; n],
        Some(1.0),
        Some(2.0),
        Some(c),
        move |b| {
            let mut terms: Vec<NodeId> = (0..n)
                .map(|i| {
                    let x = b.var(i);
                    sq_shift(b, x, cc[i])
                })
                .collect();
            terms.push(b.constant(1.0));
            b.sum(terms)
        },
    )
}

fn nqm_curvature(i: usize) -> f64 {
    crate::fpenv::pow2(-((i % 5) as i32))
}

fn nqm(n: usize) -> Problem {
    // f = sum h_i/2 (x_i - c_i)^2 with h_i in {1, 1/2, ..., 1/16}
    let c: Vec<f64> = (0..n).map(|i| (i % 3) as f64 - 1.0).collect();
    let cc = c.clone();
    make(
        "nqm",
        n,
        vec![2.0; n],
        Some(0.0),
        Some(1.0),
        Some(c),
        move |b| {
            let terms = (0..n)
                .map(|i| {
                    let x = b.var(i);
                    let s = sq_shift(b, x, cc[i]);
                    b.scale(nqm_curvature(i) / 2.0, s)
                })
                .collect();
            b.sum(terms)
        },
    )
}

fn rosen_pair(b: &mut Builder, x: NodeId, y: NodeId) -> [NodeId; 2] {
    let x2 = b.sqr(x);
    let t = b.sub(y, x2);
    let t2 = b.sqr(t);
    let a = b.scale(100.0, t2);
    let one = b.constant(1.0);
    let u = b.sub(one, x);
    [a, b.sqr(u)]
}

fn rosenbrock(n: usize) -> Problem {
    // chained: sum_{i<n} 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2
    let x0 = (0..n)
        .map(|i| if i % 2 == 0 { half(-1.2) } else { 1.0 })
        .collect();
    make(
        "rosenbrock",
        n,
        x0,
        Some(0.0),
        None,
        Some(vec![1.0; n]),
        |b| {
            let mut terms = Vec::new();
            for i in 0..n - 1 {
                let (x, y) = (b.var(i), b.var(i + 1));
                terms.extend(rosen_pair(b, x, y));
            }
            b.sum(terms)
        },
    )
}

fn extended_rosenbrock(n: usize) -> Problem {
    // independent pairs (x_{2i}, x_{2i+1})
    let x0 = (0..n)
        .map(|i| if i % 2 == 0 { half(-1.2) } else { 1.0 })
        .collect();
    make(
        "extended_rosenbrock",
        n,
        x0,
        Some(0.0),
        None,
        Some(vec![1.0; n]),
        |b| {
            let mut terms = Vec::new();
            for i in 0..n / 2 {
                let (x, y) = (b.var(2 * i), b.var(2 * i + 1));
                terms.extend(rosen_pair(b, x, y));
            }
            b.sum(terms)
        },
    )
}

fn beale(_: usize) -> Problem {
    make(
        "beale",
        2,
        vec![1.0, 1.0],
        Some(0.0),
        None,
        Some(vec![3.0, 0.5]),
        |b| {
            let (x, y) = (b.var(0), b.var(1));
            let mut terms = Vec::new();
            let mut yk = y;
            for c in [1.5, 2.25, 2.625] {
                let c = b.constant(c);
                let xy = b.mul(x, yk);
                let t = b.sub(c, x);
                let t = b.add(t, xy);
                terms.push(b.sqr(t));
                yk = b.mul(yk, y);
            }
            b.sum(terms)
        },
    )
}

fn himmelblau(_: usize) -> Problem {
    make(
        "himmelblau",
        2,
        vec![0.0, 0.0],
        Some(0.0),
        None,
        Some(vec![3.0, 2.0]),
        |b| {
            let (x, y) = (b.var(0), b.var(1));
            let x2 = b.sqr(x);
            let y2 = b.sqr(y);
            let a = b.add(x2, y);
            let c = b.add(x, y2);
            let s1 = sq_shift(b, a, 11.0);
            let s2 = sq_shift(b, c, 7.0);
            b.add(s1, s2)
        },
    )
}

fn booth(_: usize) -> Problem {
    make(
        "booth",
        2,
        vec![0.0, 0.0],
        Some(0.0),
        Some(18.0),
        Some(vec![1.0, 3.0]),
        |b| {
            let (x, y) = (b.var(0), b.var(1));
            let y2 = b.scale(2.0, y);
            let a = b.add(x, y2);
            let x2 = b.scale(2.0, x);
            let c = b.add(x2, y);
            let s1 = sq_shift(b, a, 7.0);
            let s2 = sq_shift(b, c, 5.0);
            b.add(s1, s2)
        },
    )
}

fn matyas(_: usize) -> Problem {
    // 0.26 (x^2 + y^2) - 0.48 x y; Hessian eigenvalues 0.04 and 1
    make(
        "matyas",
        2,
        vec![1.0, -0.5],
        Some(0.0),
        Some(1.01),
        Some(vec![0.0, 0.0]),
        |b| {
            let (x, y) = (b.var(0), b.var(1));
            let x2 = b.sqr(x);
            let y2 = b.sqr(y);
            let s = b.add(x2, y2);
            let a = b.scale(0.26, s);
            let xy = b.mul(x, y);
            let c = b.scale(0.48, xy);
            b.sub(a, c)
        },
    )
}

fn three_hump_camel(_: usize) -> Problem {
    // 2x^2 - 1.05x^4 + x^6/6 + xy + y^2
    make(
        "three_hump_camel",
        2,
        vec![-0.5, 1.0],
        Some(0.0),
        None,
        Some(vec![0.0, 0.0]),
        |b| {
            let (x, y) = (b.var(0), b.var(1));
            let x2 = b.sqr(x);
            let a = b.scale(2.0, x2);
            let x4 = b.pow(x, 4);
            let c = b.scale(1.05, x4);
            let x6 = b.pow(x, 6);
            let six = b.constant(6.0);
            let d = b.div(x6, six);
            let xy = b.mul(x, y);
            let y2 = b.sqr(y);
            let t = b.sub(a, c);
            b.sum(vec![t, d, xy, y2])
        },
    )
}

fn brown_badly_scaled(_: usize) -> Problem {
    make(
        "brown_badly_scaled",
        2,
        vec![1.0, 1.0],
        Some(0.0),
        None,
        None,
        |b| {
            let (x, y) = (b.var(0), b.var(1));
            let s1 = sq_shift(b, x, 1e6);
            let s2 = sq_shift(b, y, 2e-6);
            let xy = b.mul(x, y);
            let s3 = sq_shift(b, xy, 2.0);
            b.sum(vec![s1, s2, s3])
        },
    )
}

fn woods(_: usize) -> Problem {
    let x0 = vec![-3.0, -1.0, -3.0, -1.0];
    make("woods", 4, x0, Some(0.0), None, Some(vec![1.0; 4]), |b| {
        let x: Vec<NodeId> = (0..4).map(|i| b.var(i)).collect();
        let [a1, a2] = rosen_pair(b, x[0], x[1]);
        let x3s = b.sqr(x[2]);
        let t = b.sub(x[3], x3s);
        let t2 = b.sqr(t);
        let a3 = b.scale(90.0, t2);
        let one = b.constant(1.0);
        let u = b.sub(one, x[2]);
        let a4 = b.sqr(u);
        let d2 = b.shift(x[1], 1.0);
        let d4 = b.shift(x[3], 1.0);
        let d2s = b.sqr(d2);
        let d4s = b.sqr(d4);
        let s = b.add(d2s, d4s);
        let a5 = b.scale(10.1, s);
        let p = b.mul(d2, d4);
        let a6 = b.scale(19.8, p);
        b.sum(vec![a1, a2, a3, a4, a5, a6])
    })
}

fn powell_singular(_: usize) -> Problem {
    let x0 = vec![3.0, -1.0, 0.0, 1.0];
    make(
        "powell_singular",
        4,
        x0,
        Some(0.0),
        None,
        Some(vec![0.0; 4]),
        |b| {
            let x: Vec<NodeId> = (0..4).map(|i| b.var(i)).collect();
            let t = b.scale(10.0, x[1]);
            let t = b.add(x[0], t);
            let a1 = b.sqr(t);
            let t = b.sub(x[2], x[3]);
            let t = b.sqr(t);
            let a2 = b.scale(5.0, t);
            let t = b.scale(2.0, x[2]);
            let t = b.sub(x[1], t);
            let a3 = b.pow(t, 4);
            let t = b.sub(x[0], x[3]);
            let t = b.pow(t, 4);
            let a4 = b.scale(10.0, t);
            b.sum(vec![a1, a2, a3, a4])
        },
    )
}

fn trid(n: usize) -> Problem {
    // sum (x_i - 1)^2 - sum x_i x_{i-1}; minimizer x_i = i (n + 1 - i)
    let nf = n as f64;
    let f_low = -nf * (nf + 4.0) * (nf - 1.0) / 6.0;
    let xs = (1..=n).map(|i| (i * (n + 1 - i)) as f64).collect();
    make(
        "trid",
        n,
        vec![0.0; n],
        Some(f_low),
        Some(4.0),
        Some(xs),
        |b| {
            let mut terms: Vec<NodeId> = (0..n)
                .map(|i| {
                    let x = b.var(i);
                    sq_shift(b, x, 1.0)
                })
                .collect();
            for i in 1..n {
                let (x, y) = (b.var(i), b.var(i - 1));
                let p = b.mul(x, y);
                terms.push(b.neg(p));
            }
            b.sum(terms)
        },
    )
}

fn sqrt_smooth(n: usize) -> Problem {
    // sum sqrt(1 + (x_i - c_i)^2), minimum value n
    let c: Vec<f64> = (0..n).map(|i| (i % 3 + 1) as f64).collect();
    let cc = c.clone();
    make(
        "sqrt_smooth",
        n,
        vec![0.0; n],
        Some(n as f64),
        Some(1.0),
        Some(c),
        move |b| {
            let terms = (0..n)
                .map(|i| {
                    let x = b.var(i);
                    let s = sq_shift(b, x, cc[i]);
                    let one = b.constant(1.0);
                    let t = b.add(one, s);
                    b.sqrt(t)
                })
                .collect();
            b.sum(terms)
        },
    )
}

fn sum_quartics(n: usize) -> Problem {
    make(
        "sum_quartics",
        n,
        vec![0.0; n],
        Some(0.0),
        None,
        Some(vec![1.0; n]),
        |b| {
            let terms = (0..n)
                .map(|i| {
                    let x = b.var(i);
                    let t = b.shift(x, 1.0);
                    b.pow(t, 4)
                })
                .collect();
            b.sum(terms)
        },
    )
}

fn arwhead(n: usize) -> Problem {
    // sum_{i<n} (-4 x_i + 3) + (x_i^2 + x_n^2)^2
    let mut xs = vec![1.0; n];
    xs[n - 1] = 0.0;
    make("arwhead", n, vec![1.0; n], Some(0.0), None, Some(xs), |b| {
        let last = b.var(n - 1);
        let ln2 = b.sqr(last);
        let mut terms = Vec::new();
        for i in 0..n - 1 {
            let x = b.var(i);
            let t = b.scale(-4.0, x);
            let three = b.constant(3.0);
            terms.push(b.add(t, three));
            let x2 = b.sqr(x);
            let s = b.add(x2, ln2);
            terms.push(b.sqr(s));
        }
        b.sum(terms)
    })
}

fn zakharov(n: usize) -> Problem {
    // sum x_i^2 + w^2 + w^4, w = sum i x_i / 2
    make(
        "zakharov",
        n,
        vec![0.5; n],
        Some(0.0),
        None,
        Some(vec![0.0; n]),
        |b| {
            let mut terms: Vec<NodeId> = (0..n)
                .map(|i| {
                    let x = b.var(i);
                    b.sqr(x)
                })
                .collect();
            let ws = (0..n)
                .map(|i| {
                    let x = b.var(i);
                    b.scale((i + 1) as f64 / 2.0, x)
                })
                .collect();
            let w = b.sum(ws);
            terms.push(b.sqr(w));
            terms.push(b.pow(w, 4));
            b.sum(terms)
        },
    )
}

fn dixon_price(n: usize) -> Problem {
    // (x_1 - 1)^2 + sum_{i>=2} i (2 x_i^2 - x_{i-1})^2
    make("dixon_price", n, vec![1.0; n], Some(0.0), None, None, |b| {
        let x0 = b.var(0);
        let mut terms = vec![sq_shift(b, x0, 1.0)];
        for i in 1..n {
            let (x, y) = (b.var(i), b.var(i - 1));
            let x2 = b.sqr(x);
            let t = b.scale(2.0, x2);
            let t = b.sub(t, y);
            let t = b.sqr(t);
            terms.push(b.scale((i + 1) as f64, t));
        }
        b.sum(terms)
    })
}

fn sum_sq(b: &mut Builder, r: Vec<NodeId>) -> NodeId {
    let sq = r.into_iter().map(|t| b.sqr(t)).collect();
    b.sum(sq)
}

fn bard(_: usize) -> Problem {
    const Y: [f64; 15] = [
        0.14, 0.18, 0.22, 0.25, 0.29, 0.32, 0.35, 0.39, 0.37, 0.58, 0.73, 0.96, 1.34, 2.10, 4.39,
    ];
    // r_i = y_i - (x1 + u_i / (v_i x2 + w_i x3)), u = i, v = 16 - i, w = min(u, v)
    make("bard", 3, vec![1.0; 3], Some(0.0), None, None, |b| {
        let (x1, x2, x3) = (b.var(0), b.var(1), b.var(2));
        let r = (1..=15)
            .map(|i| {
                let u = i as f64;
                let v = 16.0 - u;
                let w = u.min(v);
                let d2 = b.scale(v, x2);
                let d3 = b.scale(w, x3);
                let den = b.add(d2, d3);
                let num = b.constant(u);
                let q = b.div(num, den);
                let m = b.add(x1, q);
                let y = b.constant(Y[i - 1]);
                b.sub(y, m)
            })
            .collect();
        sum_sq(b, r)
    })
}

fn kowalik_osborne(_: usize) -> Problem {
    const Y: [f64; 11] = [
        0.1957, 0.1947, 0.1735, 0.1600, 0.0844, 0.0627, 0.0456, 0.0342, 0.0323, 0.0235, 0.0246,
    ];
    const U: [f64; 11] = [
        4.0, 2.0, 1.0, 0.5, 0.25, 0.167, 0.125, 0.1, 0.0833, 0.0714, 0.0625,
    ];
    // r_i = y_i - x1 (u^2 + u x2) / (u^2 + u x3 + x4)
    let x0 = [0.25, 0.39, 0.415, 0.39].map(half).to_vec();
    make("kowalik_osborne", 4, x0, Some(0.0), None, None, |b| {
        let x: Vec<NodeId> = (0..4).map(|i| b.var(i)).collect();
        let r = (0..11)
            .map(|i| {
                let u = U[i];
                let u2 = b.constant(u * u);
                let ux2 = b.scale(u, x[1]);
                let num = b.add(u2, ux2);
                let num = b.mul(x[0], num);
                let ux3 = b.scale(u, x[2]);
                let den = b.add(u2, ux3);
                let den = b.add(den, x[3]);
                let q = b.div(num, den);
                let y = b.constant(Y[i]);
                b.sub(y, q)
            })
            .collect();
        sum_sq(b, r)
    })
}

fn penalty_i(n: usize) -> Problem {
    // 1e-5 sum (x_i - 1)^2 + (sum x_i^2 - 1/4)^2, x0_i = i
    let x0 = (1..=n).map(|i| i as f64).collect();
    make("penalty_i", n, x0, Some(0.0), None, None, |b| {
        let mut terms = Vec::new();
        let mut sq = Vec::new();
        for i in 0..n {
            let x = b.var(i);
            let t = sq_shift(b, x, 1.0);
            terms.push(b.scale(1e-5, t));
            sq.push(b.sqr(x));
        }
        let s = b.sum(sq);
        terms.push(sq_shift(b, s, 0.25));
        b.sum(terms)
    })
}

fn watson(n: usize) -> Problem {
    // 29 polynomial-fit residuals at t_i = i/29 plus x1 and x2 - x1^2 - 1
    make("watson", n, vec![0.0; n], Some(0.0), None, None, |b| {
        let x: Vec<NodeId> = (0..n).map(|i| b.var(i)).collect();
        let mut r = Vec::with_capacity(31);
        for i in 1..=29 {
            let t = i as f64 / 29.0;
            let d = (1..n)
                .map(|j| b.scale(j as f64 * t.powi(j as i32 - 1), x[j]))
                .collect();
            let d = b.sum(d);
            let s = (0..n).map(|j| b.scale(t.powi(j as i32), x[j])).collect();
            let s = b.sum(s);
            let s2 = b.sqr(s);
            let e = b.sub(d, s2);
            r.push(b.shift(e, 1.0));
        }
        r.push(x[0]);
        let x12 = b.sqr(x[0]);
        let e = b.sub(x[1], x12);
        r.push(b.shift(e, 1.0));
        sum_sq(b, r)
    })
}

fn linear_full_rank(n: usize) -> Problem {
    // m = 2n residuals of A x - 1 with A = [I - (2/m) J; -(2/m) 1 1^T]; A^T A = I
    let m = 2 * n;
    let c = 2.0 / m as f64;
    make(
        "linear_full_rank",
        n,
        vec![1.0; n],
        Some((m - n) as f64),
        Some(2.0),
        Some(vec![-1.0; n]),
        |b| {
            let x: Vec<NodeId> = (0..n).map(|i| b.var(i)).collect();
            let s = b.sum(x.clone());
            let cs = b.scale(c, s);
            let r = (0..m)
                .map(|i| {
                    let t = if i < n { b.sub(x[i], cs) } else { b.neg(cs) };
                    b.shift(t, 1.0)
                })
                .collect();
            sum_sq(b, r)
        },
    )
}

fn linear_rank1(n: usize) -> Problem {
    // m = 2n residuals i (sum_j j x_j) - 1
    let m = 2 * n;
    let si: f64 = (1..=m).map(|i| (i * i) as f64).sum();
    let sj: f64 = (1..=n).map(|j| (j * j) as f64).sum();
    let f_low = (m * (m - 1)) as f64 / (2 * (2 * m + 1)) as f64;
    // f_low is a rounded bound; shift down by one ulp-ish margin
    let f_low = f_low * (1.0 - 1e-15);
    make(
        "linear_rank1",
        n,
        vec![1.0; n],
        Some(f_low),
        Some(2.0 * si * sj),
        None,
        |b| {
            let t = (0..n)
                .map(|j| {
                    let x = b.var(j);
                    b.scale((j + 1) as f64, x)
                })
                .collect();
            let s = b.sum(t);
            let r = (1..=m)
                .map(|i| {
                    let v = b.scale(i as f64, s);
                    b.shift(v, 1.0)
                })
                .collect();
            sum_sq(b, r)
        },
    )
}

fn chebyquad(n: usize) -> Problem {
    // r_i = mean_j T_i(2 x_j - 1) - int_0^1 T_i(2t - 1) dt, i = 1..n
    let x0 = (1..=n).map(|j| half(j as f64 / (n + 1) as f64)).collect();
    make("chebyquad", n, x0, Some(0.0), None, None, |b| {
        let mut sums: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for j in 0..n {
            let x = b.var(j);
            let t = b.scale(2.0, x);
            let t = b.shift(t, 1.0);
            let two_t = b.scale(2.0, t);
            let mut prev = b.constant(1.0);
            let mut cur = t;
            for (i, s) in sums.iter_mut().enumerate() {
                s.push(cur);
                if i + 1 < n {
                    let p = b.mul(two_t, cur);
                    let next = b.sub(p, prev);
                    prev = cur;
                    cur = next;
                }
            }
        }
        let r = sums
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let deg = i + 1;
                let s = b.sum(s);
                let mean = b.scale(1.0 / n as f64, s);
                if deg % 2 == 0 {
                    let c = -1.0 / ((deg * deg) as f64 - 1.0);
                    b.shift(mean, c)
                } else {
                    mean
                }
            })
            .collect();
        sum_sq(b, r)
    })
}

fn engval1(n: usize) -> Problem {
    // sum_{i<n} (x_i^2 + x_{i+1}^2)^2 - 4 x_i + 3; each term >= x_i^4 - 4 x_i + 3 >= 0
    make("engval1", n, vec![2.0; n], Some(0.0), None, None, |b| {
        let mut terms = Vec::new();
        for i in 0..n - 1 {
            let (x, y) = (b.var(i), b.var(i + 1));
            let x2 = b.sqr(x);
            let y2 = b.sqr(y);
            let s = b.add(x2, y2);
            terms.push(b.sqr(s));
            terms.push(b.scale(-4.0, x));
            terms.push(b.constant(3.0));
        }
        b.sum(terms)
    })
}

fn dixmaana(n: usize) -> Problem {
    // 1 + sum x_i^2 + 1/8 sum_{i<=2m} x_i^2 x_{i+m}^4 + 1/8 sum_{i<=m} x_i x_{i+2m}, m = n/3
    let m = n / 3;
    make(
        "dixmaana",
        n,
        vec![2.0; n],
        Some(1.0),
        None,
        Some(vec![0.0; n]),
        |b| {
            let x: Vec<NodeId> = (0..n).map(|i| b.var(i)).collect();
            let mut terms = vec![b.constant(1.0)];
            for &xi in &x {
                terms.push(b.sqr(xi));
            }
            for i in 0..2 * m {
                let a = b.sqr(x[i]);
                let c = b.pow(x[i + m], 4);
                let t = b.mul(a, c);
                terms.push(b.scale(0.125, t));
            }
            for i in 0..m {
                let t = b.mul(x[i], x[i + 2 * m]);
                terms.push(b.scale(0.125, t));
            }
            b.sum(terms)
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalmodel::rat;
    use num_traits::Zero;

    fn rats(x: &[f64]) -> Vec<BigRational> {
        x.iter().map(|&v| rat(v)).collect()
    }

    #[test]
    fn registry_examples() {
        let p = get_problem("rosenbrock", Some(2)).unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.x0(), &[half(-1.2), 1.0]);
        assert_eq!(p.x0()[0], -1.2001953125);
        assert_eq!(p.f_low(), Some(0.0));
        let q = get_problem("quadratic", Some(100)).unwrap();
        assert_eq!(q.lipschitz(), Some(100.0));
        let r = get_problem("rosenbrock", Some(3)).unwrap();
        let f = exact_eval(&r, &rats(&[1.0, 1.0, 1.0])).unwrap();
        assert!(f.lo.is_zero() && f.is_exact());
        assert!(matches!(
            get_problem("nope", None),
            Err(ProblemError::UnknownProblem(_))
        ));
        assert!(matches!(
            get_problem("beale", Some(3)),
            Err(ProblemError::BadDimension { .. })
        ));
        assert!(get_problem("extended_rosenbrock", Some(3)).is_err());
    }

    #[test]
    fn exact_values() {
        let p = get_problem("beale", None).unwrap();
        assert!(exact_eval(&p, &rats(&[3.0, 0.5])).unwrap().lo.is_zero());
        // 1/2 (1*9 + 2*16) with d = (1, 2)
        let q = get_problem("quadratic", Some(2)).unwrap();
        let v = exact_eval(&q, &rats(&[3.0, 4.0])).unwrap();
        assert_eq!(v.lo, BigRational::new(41.into(), 2.into()));
    }

    #[test]
    fn gradient_vanishes_at_minimizers() {
        for p in default_suite() {
            let Some(xs) = p.minimizer() else { continue };
            let g = exact_grad(&p, &rats(xs)).unwrap();
            for (i, gi) in g.iter().enumerate() {
                assert!(
                    gi.is_exact() && gi.lo.is_zero(),
                    "{} component {i}",
                    p.name()
                );
            }
        }
    }

    #[test]
    fn start_points_are_half_representable() {
        for p in default_suite() {
            assert!(
                p.x0().iter().all(|&v| FpFormat::HALF.represents(v)),
                "{}",
                p.name()
            );
            assert_eq!(p.x0().len(), p.dim());
        }
    }

    #[test]
    fn lower_bounds_hold_at_minimizers() {
        for p in default_suite() {
            let (Some(xs), Some(fl)) = (p.minimizer(), p.f_low()) else {
                continue;
            };
            let f = exact_eval(&p, &rats(xs)).unwrap();
            assert!(f.hi >= rat(fl), "{}", p.name());
        }
    }

    #[test]
    fn trid_lower_bound_is_attained() {
        let p = get_problem("trid", Some(6)).unwrap();
        let f = exact_eval(&p, &rats(p.minimizer().unwrap())).unwrap();
        assert_eq!(f.lo, rat(p.f_low().unwrap()));
    }

    #[test]
    fn suite_has_enough_problems() {
        assert!(default_suite().len() >= 12);
        let manifest = include_str!("../PROBLEMS.md");
        for name in problem_names() {
            assert!(
                manifest.contains(&format!("`{name}`")),
                "{name} missing from PROBLEMS.md"
            );
        }
    }
}
