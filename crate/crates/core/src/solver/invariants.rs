use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::defined::DefinedReal;
use crate::errbounds::ErrorContext;
use crate::evalmodel::{defined_gradient, rat, RatInterval};
use crate::problems::{exact_eval, exact_grad, Problem};

use super::config::SolverConfig;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    /// Upper bound on `‖∇f(x)‖`.
    pub norm_upper: f64,
    pub holds: bool,
    /// Rational evaluation was used (otherwise double-double).
    pub rational: bool,
}

/// Check `‖∇f(x)‖ <= eps` without the solver's own evaluation path.
pub fn certify_first_order(p: &Problem, x: &[f64], eps: f64) -> Certificate {
    let xr: Vec<BigRational> = x.iter().map(|&v| rat(v)).collect();
    if let Ok(g) = exact_grad(p, &xr) {
        let sq = g
            .iter()
            .map(|iv| {
                let m = iv.mag();
                &m * &m
            })
            .fold(BigRational::zero(), |a, b| a + b);
        let e = rat(eps);
        let holds = sq <= &e * &e;
        let norm_upper = sq.to_f64().unwrap_or(f64::INFINITY).sqrt();
        return Certificate {
            norm_upper,
            holds,
            rational: true,
        };
    }
    match defined_gradient(p, x) {
        Ok((_, g)) => {
            let n: DefinedReal = g.iter().map(|v| v.sqr()).sum::<DefinedReal>().sqrt();
            Certificate {
                norm_upper: n.to_f64(),
                holds: n <= eps,
                rational: false,
            }
        }
        Err(_) => Certificate {
            norm_upper: f64::INFINITY,
            holds: false,
            rational: false,
        },
    }
}

fn d(x: f64) -> DefinedReal {
    DefinedReal::from(x)
}

/// `1 - η2 - η0 - κ/2`.
fn margin(cfg: &SolverConfig) -> DefinedReal {
    DefinedReal::ONE - d(cfg.eta2) - d(cfg.eta0) - d(cfg.kappa_mu) / 2.0
}

/// Largest reachable `σ` for a gradient Lipschitz constant `l`, taken over
/// all formats of the stack.
pub fn sigma_max(cfg: &SolverConfig, ctx: &ErrorContext, l: f64) -> DefinedReal {
    let alpha = ctx.at(0).alpha_n1;
    let u_min = ctx.u(ctx.stack().top_index());
    let lambda_max = d(cfg.kappa_mu) * (DefinedReal::ONE - u_min) / alpha;
    let m = margin(cfg);
    if m <= 0.0 {
        return DefinedReal::INFINITY;
    }
    d(cfg.gamma3) * d(l) * (DefinedReal::ONE + lambda_max).sqr() * alpha / m
}

/// Upper bound on the number of successful iterations before termination;
/// infinite when `η1 <= 2η0`.
pub fn successful_iteration_bound(
    cfg: &SolverConfig,
    ctx: &ErrorContext,
    l: f64,
    f0_minus_flow: DefinedReal,
) -> DefinedReal {
    let gap = d(cfg.eta1) - d(cfg.eta0) * 2.0;
    if gap <= 0.0 {
        return DefinedReal::INFINITY;
    }
    let one = DefinedReal::ONE;
    let b = ctx.at(0);
    let beta = b.beta_n2;
    let u_max = b.u;
    let q = (one + beta) / (one - beta) * (one + d(cfg.kappa_mu)) / (one - u_max);
    let kappa_s = q.sqr() * sigma_max(cfg, ctx, l) / (gap * (one - b.gamma_n1));
    kappa_s * f0_minus_flow / d(cfg.eps).sqr()
}

/// Online checks of the convergence theory for guaranteed runs.
pub(crate) struct Monitor<'a> {
    p: &'a Problem,
    cfg: &'a SolverConfig,
    ctx: &'a ErrorContext,
    enabled: bool,
    sigma_cap: Option<DefinedReal>,
    f_current: Option<RatInterval>,
    pub violations: Vec<String>,
}

impl<'a> Monitor<'a> {
    pub fn new(
        p: &'a Problem,
        cfg: &'a SolverConfig,
        ctx: &'a ErrorContext,
        enabled: bool,
    ) -> Self {
        let sigma_cap = p
            .lipschitz()
            .map(|l| sigma_max(cfg, ctx, l).max(d(cfg.sigma0)));
        let f_current = if enabled {
            exact_eval(p, &to_rat(p.x0())).ok()
        } else {
            None
        };
        Self {
            p,
            cfg,
            ctx,
            enabled,
            sigma_cap,
            f_current,
            violations: Vec::new(),
        }
    }

    fn fail(&mut self, msg: String) {
        self.violations.push(msg);
    }

    pub fn step(&mut self, k: usize, delta_t: f64, pi_g: usize, pi_x: usize, mu: DefinedReal) {
        if !self.enabled {
            return;
        }
        if delta_t.is_sign_negative() || delta_t.is_nan() {
            self.fail(format!("k={k}: model decrease {delta_t:e} is negative"));
        }
        if pi_g < pi_x {
            self.fail(format!("k={k}: gradient format below iterate format"));
        }
        if mu > self.cfg.kappa_mu {
            self.fail(format!("k={k}: mu = {mu} exceeds kappa_mu"));
        }
    }

    /// Small `σ` relative to the Lipschitz constant forces a very successful
    /// iteration.
    pub fn rho(
        &mut self,
        k: usize,
        sigma: f64,
        pi_g: usize,
        lambda: DefinedReal,
        rho: DefinedReal,
    ) {
        let Some(l) = self.p.lipschitz() else { return };
        if !self.enabled {
            return;
        }
        let alpha = self.ctx.at(pi_g).alpha_n1;
        let bound = margin(self.cfg) / (alpha * d(l) * (DefinedReal::ONE + lambda).sqr());
        let premise = d(sigma).recip() <= bound;
        if premise && rho < self.cfg.eta2 {
            self.fail(format!(
                "k={k}: sigma = {sigma:e} is small enough for rho >= eta2 but rho = {rho}"
            ));
        }
    }

    pub fn sigma(&mut self, k: usize, sigma: f64) {
        if !self.enabled {
            return;
        }
        if let Some(cap) = self.sigma_cap {
            if d(sigma) > cap {
                self.fail(format!(
                    "k={k}: sigma = {sigma:e} exceeds sigma_max = {cap}"
                ));
            }
        }
    }

    /// Accepted steps must not increase the exact objective.
    pub fn accepted(&mut self, k: usize, x_new: &[f64]) {
        if !self.enabled {
            return;
        }
        let new = exact_eval(self.p, &to_rat(x_new)).ok();
        if let (Some(old), Some(new)) = (&self.f_current, &new) {
            if new.lo > old.hi {
                self.fail(format!("k={k}: accepted step increased the objective"));
            }
        }
        self.f_current = new;
    }

    pub fn finish(&mut self, successful: usize) {
        if !self.enabled {
            return;
        }
        let (Some(l), Some(f_low)) = (self.p.lipschitz(), self.p.f_low()) else {
            return;
        };
        let Ok(f0) = exact_eval(self.p, &to_rat(self.p.x0())) else {
            return;
        };
        let gap = (f0.hi - rat(f_low)).to_f64().unwrap_or(f64::INFINITY);
        let gap = d(gap) * (1.0 + f64::EPSILON);
        let bound = successful_iteration_bound(self.cfg, self.ctx, l, gap);
        if d(successful as f64) > bound {
            self.fail(format!(
                "{successful} successful iterations exceed the bound {bound}"
            ));
        }
    }
}

fn to_rat(x: &[f64]) -> Vec<BigRational> {
    x.iter().map(|&v| rat(v)).collect()
}
