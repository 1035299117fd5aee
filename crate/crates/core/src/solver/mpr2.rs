use crate::defined::DefinedReal;
use crate::errbounds::{lambda_k, stopping_threshold, u_prime, ErrorContext};
use crate::evalmodel::{eval_gradient, eval_objective, ErrorMode, EvalError, ObjectiveEval};
use crate::fpenv::{fp_norm_in, FormatStack, FpFormat, TaggedValue, TaggedVector};
use crate::harness::EffortModel;
use crate::problems::Problem;

use super::config::{validate_params, SolverConfig, SolverMode};
use super::invariants::{certify_first_order, Monitor};
use super::steps::{
    compute_candidate, compute_step, first_passing, model_decrease, rho_and_accept, rho_in_format,
    update_sigma, StepError,
};
use super::{EffortSummary, EvalCounters, EvalKind, IterRecord, RunReport, SolverError, Status};

/// Control flow of one solver phase.
enum Flow<T> {
    Go(T),
    /// Redo the gradient one format higher (only issued below the top).
    Escalate(&'static str),
    /// Reject the step as if `ρ = -∞`.
    Reject(&'static str),
    End(Status, String),
}

struct Grad {
    g: TaggedVector,
    omega: DefinedReal,
    gnorm: TaggedValue,
}

struct Prep {
    c: TaggedVector,
    delta_t: DefinedReal,
    delta_t_raw: f64,
    mu: DefinedReal,
    lambda: DefinedReal,
}

struct Mpr2<'a> {
    p: &'a Problem,
    cfg: &'a SolverConfig,
    ctx: &'a ErrorContext,
    stack: FormatStack,
    mode: ErrorMode,
    top: usize,
    counters: EvalCounters,
    trace: Vec<IterRecord>,
    monitor: Monitor<'a>,
    flags: Vec<String>,

    x: TaggedVector,
    px: usize,
    f: f64,
    f_omega: DefinedReal,
    pf_x: usize,
    sigma: f64,
    pc: usize,
    pg: usize,
    grad: Option<Grad>,
    norm_x: Option<TaggedValue>,
    last_gnorm: f64,
    k: usize,
    successful: usize,
}

/// Multi-precision quadratic regularization in the mode of `cfg.mode`
/// (guaranteed, relaxed or exact).
pub fn run_mpr2(p: &Problem, cfg: &SolverConfig) -> Result<RunReport, SolverError> {
    let warnings = validate_params(cfg)?;
    let n = p.dim();
    let stack = cfg.formats.clone();
    let mode = match cfg.mode {
        SolverMode::R2 => return super::run_r2(p, cfg),
        m => m.error_mode(),
    };
    let ctx = match mode {
        ErrorMode::Exact => ErrorContext::exact(n, &stack),
        _ => ErrorContext::new(n, cfg.gamma_formula, &stack)?,
    };
    let top = stack.top_index();
    let px = stack.lowest_containing(p.x0()).unwrap_or(top);
    let x = TaggedVector::new(p.x0().to_vec(), stack.get(px)).map_err(EvalError::from)?;
    let check = cfg.check_invariants && mode == ErrorMode::Guaranteed;
    let mut run = Mpr2 {
        p,
        cfg,
        ctx: &ctx,
        counters: EvalCounters::new(&stack),
        stack,
        mode,
        top,
        trace: Vec::new(),
        monitor: Monitor::new(p, cfg, &ctx, check),
        flags: Vec::new(),
        x,
        px,
        f: f64::NAN,
        f_omega: DefinedReal::ZERO,
        pf_x: px,
        sigma: cfg.sigma0,
        pc: 0,
        pg: px,
        grad: None,
        norm_x: None,
        last_gnorm: f64::NAN,
        k: 0,
        successful: 0,
    };
    let (status, detail) = run.iterate()?;
    Ok(run.finish(status, detail, warnings))
}

impl<'a> Mpr2<'a> {
    fn fmt(&self, i: usize) -> FpFormat {
        self.stack.get(i)
    }

    fn guaranteed(&self) -> bool {
        self.mode == ErrorMode::Guaranteed
    }

    fn relaxed(&self) -> bool {
        self.mode == ErrorMode::Relaxed
    }

    fn exact(&self) -> bool {
        self.mode == ErrorMode::Exact
    }

    fn flag(&mut self, s: &str) {
        self.flags.push(s.to_string());
    }

    /// Counted as successful until demoted.
    fn eval_f(&mut self, x: &TaggedVector, i: usize) -> Result<Option<ObjectiveEval>, SolverError> {
        match eval_objective(self.p, x, self.fmt(i), self.mode) {
            Ok(ev) => {
                self.counters.record(EvalKind::Objective, i, true);
                Ok(Some(ev))
            }
            Err(EvalError::Fp(_)) => {
                self.counters.record(EvalKind::Objective, i, false);
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Norm in the first format from `start` that neither overflows nor,
    /// outside exact mode, underflows.
    fn norm_from(&self, v: &TaggedVector, start: usize) -> Option<TaggedValue> {
        for i in start..=self.top {
            match fp_norm_in(v, self.fmt(i)) {
                Ok(r) if !r.underflow || self.exact() || i == self.top => return Some(r.value),
                _ => {}
            }
        }
        None
    }

    fn initial_objective(&mut self) -> Result<Flow<()>, SolverError> {
        let x = self.x.clone();
        for i in self.px..=self.top {
            if let Some(ev) = self.eval_f(&x, i)? {
                if self.relaxed() && ev.underflow && i < self.top {
                    self.counters.demote(EvalKind::Objective, i);
                    continue;
                }
                self.f = ev.value.value();
                self.f_omega = ev.omega;
                self.pf_x = i;
                return Ok(Flow::Go(()));
            }
        }
        Ok(Flow::End(
            Status::PrecisionFailure,
            "objective overflows at the starting point".into(),
        ))
    }

    fn iterate(&mut self) -> Result<(Status, String), SolverError> {
        if let Flow::End(s, d) = self.initial_objective()? {
            return Ok((s, d));
        }
        self.pg = self.pc.max(self.px);
        loop {
            if self.k >= self.cfg.max_iter {
                return Ok((Status::MaxIter, String::new()));
            }
            self.flags.clear();
            let x_rec = self.cfg.record_iterates.then(|| self.x.values().to_vec());

            // Steps 1 and 2: gradient, stopping test, step and formats.
            let prep = loop {
                if self.grad.is_none() {
                    match self.acquire_gradient()? {
                        Flow::Go(()) => {}
                        Flow::End(s, d) => return Ok((s, d)),
                        _ => unreachable!("gradient acquisition escalates internally"),
                    }
                }
                match self.prepare_step() {
                    Flow::Go(p) => break Some(p),
                    Flow::Escalate(why) => {
                        self.flag(why);
                        self.discard_gradient();
                        self.pg += 1;
                    }
                    Flow::Reject(why) => {
                        self.flag(why);
                        break None;
                    }
                    Flow::End(s, d) => return Ok((s, d)),
                }
            };
            let Some(prep) = prep else {
                self.record(x_rec, None, f64::NAN, f64::NAN, None, false);
                if let Some(end) = self.sigma_step(DefinedReal::from(f64::NEG_INFINITY)) {
                    return Ok(end);
                }
                continue;
            };
            self.monitor
                .step(self.k, prep.delta_t_raw, self.pg, self.px, prep.mu);

            // Step 3: objective precision.
            let (f_plus, pf) = match self.objective_step(&prep)? {
                Flow::Go(v) => v,
                Flow::Reject(why) => {
                    self.flag(why);
                    let mu = prep.mu.to_f64();
                    self.record(x_rec, None, prep.delta_t_raw, mu, None, false);
                    if let Some(end) = self.sigma_step(DefinedReal::from(f64::NEG_INFINITY)) {
                        return Ok(end);
                    }
                    continue;
                }
                Flow::End(s, d) => return Ok((s, d)),
                Flow::Escalate(_) => unreachable!(),
            };

            // Step 4: acceptance.
            let fp = f_plus.value.value();
            let (rho, accepted) = if self.cfg.rho_correction {
                let idx = pf.max(self.pf_x).max(self.pg);
                let r = rho_in_format(self.f, fp, prep.delta_t_raw, self.fmt(idx));
                (r, r >= self.cfg.eta1)
            } else {
                rho_and_accept(self.f, fp, prep.delta_t, self.cfg.eta1)
            };
            self.monitor
                .rho(self.k, self.sigma, self.pg, prep.lambda, rho);
            self.record(
                x_rec,
                Some(pf),
                prep.delta_t_raw,
                prep.mu.to_f64(),
                Some(rho.to_f64()),
                accepted,
            );
            if accepted {
                self.monitor.accepted(self.k, prep.c.values());
                self.x = prep.c;
                self.px = self.pc;
                self.f = fp;
                self.f_omega = f_plus.omega;
                self.pf_x = pf;
                self.successful += 1;
                self.pc = pf.saturating_sub(1);
                self.pg = self.pc.max(self.px);
                self.grad = None;
                self.norm_x = None;
            }
            // Step 5.
            if let Some(end) = self.sigma_step(rho) {
                return Ok(end);
            }
        }
    }

    /// Update `σ` and count the iteration.
    fn sigma_step(&mut self, rho: DefinedReal) -> Option<(Status, String)> {
        self.k += 1;
        match update_sigma(self.sigma, rho, self.cfg) {
            Ok(s) => {
                self.sigma = s;
                self.monitor.sigma(self.k, s);
                None
            }
            Err(_) => Some((Status::Stalled, "sigma overflow".into())),
        }
    }

    fn discard_gradient(&mut self) {
        if self.grad.take().is_some() {
            self.counters.demote(EvalKind::Gradient, self.pg);
        }
    }

    /// Step 1: evaluate the gradient at `π_g`, escalating on failure, and
    /// apply the stopping test.
    fn acquire_gradient(&mut self) -> Result<Flow<()>, SolverError> {
        loop {
            let fmt = self.fmt(self.pg);
            let res = eval_gradient(self.p, &self.x, fmt, self.mode);
            let at_top = self.pg == self.top;
            let why = match res {
                Ok(ge) => {
                    self.counters.record(EvalKind::Gradient, self.pg, true);
                    if self.relaxed() && ge.underflow && !at_top {
                        "gradient_underflow"
                    } else if let Some(gnorm) = self.norm_from(&ge.value, self.pg) {
                        self.last_gnorm = gnorm.value();
                        let stop = match self.mode {
                            ErrorMode::Guaranteed => {
                                let beta = self.ctx.of(gnorm.format()).beta_n2;
                                let thr = stopping_threshold(
                                    DefinedReal::from(self.cfg.eps),
                                    ge.omega,
                                    beta,
                                );
                                gnorm.value() <= thr.to_f64()
                                    && DefinedReal::from(gnorm.value()) <= thr
                            }
                            _ => gnorm.value() <= self.cfg.eps,
                        };
                        if stop {
                            return Ok(Flow::End(Status::FirstOrder, String::new()));
                        }
                        self.grad = Some(Grad {
                            g: ge.value,
                            omega: ge.omega,
                            gnorm,
                        });
                        return Ok(Flow::Go(()));
                    } else {
                        "gradient_norm_overflow"
                    }
                }
                Err(EvalError::ZeroGradientBound { radius }) => {
                    self.counters.record(EvalKind::Gradient, self.pg, true);
                    if radius <= self.cfg.eps {
                        self.last_gnorm = 0.0;
                        return Ok(Flow::End(Status::FirstOrder, String::new()));
                    }
                    "zero_gradient_uncertain"
                }
                Err(EvalError::Fp(_)) => {
                    self.counters.record(EvalKind::Gradient, self.pg, true);
                    "gradient_overflow"
                }
                Err(e) => return Err(e.into()),
            };
            self.counters.demote(EvalKind::Gradient, self.pg);
            if at_top {
                return Ok(Flow::End(
                    Status::PrecisionFailure,
                    format!("{why} in the top format"),
                ));
            }
            self.flag(why);
            self.pg += 1;
        }
    }

    fn escalate_or(&self, why: &'static str, top_outcome: Flow<Prep>) -> Flow<Prep> {
        if self.pg < self.top {
            Flow::Escalate(why)
        } else {
            top_outcome
        }
    }

    /// Step 2: step, model decrease, `μ` loop, then the candidate.
    fn prepare_step(&mut self) -> Flow<Prep> {
        let g = self.grad.as_ref().expect("gradient available");
        let guaranteed = self.guaranteed();
        let exact = self.exact();
        let underflow_end = || {
            if guaranteed {
                Flow::End(
                    Status::PrecisionFailure,
                    "underflow in the top format".into(),
                )
            } else {
                Flow::Go(())
            }
        };

        let s = match compute_step(&g.g, self.sigma) {
            Ok(r) => r,
            Err(StepError::SigmaNotRepresentable(..)) => {
                return self.escalate_or(
                    "sigma_range",
                    Flow::End(Status::Stalled, "sigma outside the top format".into()),
                )
            }
            Err(StepError::Fp(_)) => {
                return self.escalate_or("step_overflow", Flow::Reject("step_overflow"))
            }
        };
        if s.underflow && !exact {
            if self.pg < self.top {
                return Flow::Escalate("step_underflow");
            }
            if let Flow::End(a, b) = underflow_end() {
                return Flow::End(a, b);
            }
        }
        let s = s.value;
        let dt = match model_decrease(&g.g, &s) {
            Ok(r) => r,
            Err(_) => {
                return self.escalate_or("decrease_overflow", Flow::Reject("decrease_overflow"))
            }
        };
        if dt.underflow && !exact {
            if self.pg < self.top {
                return Flow::Escalate("decrease_underflow");
            }
            if let Flow::End(a, b) = underflow_end() {
                return Flow::End(a, b);
            }
        }
        let delta_t_raw = dt.value.value();
        if delta_t_raw <= 0.0 {
            return self.escalate_or(
                "zero_decrease",
                Flow::End(Status::Stalled, "model decrease is zero".into()),
            );
        }

        let phi = if self.ctx.is_exact() {
            DefinedReal::ZERO
        } else {
            if self.norm_x.is_none() {
                self.norm_x = self.norm_from(&self.x, self.px);
            }
            let ns = self.norm_from(&s, self.pg);
            match (self.norm_x, ns) {
                (Some(nx), Some(ns)) => match self.ctx.phi_bound(nx, ns) {
                    Ok(phi) => phi,
                    Err(_) => {
                        return self.escalate_or(
                            "step_norm_zero",
                            Flow::End(Status::Stalled, "step norm is zero".into()),
                        )
                    }
                },
                _ => {
                    return self.escalate_or(
                        "norm_overflow",
                        Flow::End(
                            Status::PrecisionFailure,
                            "norm overflow in the top format".into(),
                        ),
                    )
                }
            }
        };

        let g = self.grad.as_ref().expect("gradient available");
        let (mu, lambda) = loop {
            let up = u_prime(self.ctx.u(self.pg), self.ctx.u(self.pc));
            let lambda = lambda_k(phi, up);
            let mu = self.ctx.mu_k(self.pg, g.omega, lambda);
            let lhs = if self.relaxed() {
                mu * self.cfg.relax_a
            } else {
                mu
            };
            if lhs <= self.cfg.kappa_mu {
                break (mu, lambda);
            }
            if self.pc < self.pg {
                self.pc += 1;
                continue;
            }
            if self.pg < self.top {
                return Flow::Escalate("mu");
            }
            if guaranteed {
                return Flow::End(
                    Status::PrecisionFailure,
                    "mu exceeds kappa_mu in every format".into(),
                );
            }
            break (mu, lambda);
        };

        let c = loop {
            match compute_candidate(&self.x, &s, self.fmt(self.pc)) {
                Err(_) if self.pc < self.pg => self.pc += 1,
                Err(_) => {
                    return self
                        .escalate_or("candidate_overflow", Flow::Reject("candidate_overflow"))
                }
                Ok(c) => {
                    if c.sum_unchanged {
                        return self.escalate_or(
                            "candidate_unchanged",
                            Flow::End(Status::Stalled, "candidate equals the iterate".into()),
                        );
                    }
                    if (c.unchanged || (c.underflow && !exact)) && self.pc < self.top {
                        self.pc += 1;
                        continue;
                    }
                    if c.unchanged {
                        return Flow::End(Status::Stalled, "candidate equals the iterate".into());
                    }
                    break c.value;
                }
            }
        };
        Flow::Go(Prep {
            c,
            delta_t: DefinedReal::from(delta_t_raw),
            delta_t_raw,
            mu,
            lambda,
        })
    }

    /// `γ_2(u_ρ)|f|` when the `ρ` correction is on.
    fn rho_term(&self, pf: usize, pf_x: usize, f: DefinedReal) -> DefinedReal {
        if !self.cfg.rho_correction {
            return DefinedReal::ZERO;
        }
        let u = self
            .ctx
            .u(pf)
            .min(self.ctx.u(pf_x))
            .min(self.ctx.u(self.pg));
        self.ctx.gamma_2(u) * f.abs()
    }

    /// Step 3: evaluate the candidate objective accurately enough, and
    /// re-evaluate the current one if needed.
    fn objective_step(&mut self, prep: &Prep) -> Result<Flow<(ObjectiveEval, usize)>, SolverError> {
        let bound = prep.delta_t * self.cfg.eta0;
        let f_prev = DefinedReal::from(self.f);
        let u_old = self.ctx.u(self.pf_x);
        let f_pred = (f_prev - prep.delta_t).abs();
        let scale = if f_prev.is_zero() {
            DefinedReal::ONE
        } else {
            f_pred / f_prev.abs()
        };
        let mut pf = first_passing(self.ctx, self.pc, bound, |j| {
            let base = if u_old.is_zero() {
                DefinedReal::ZERO
            } else {
                self.f_omega * scale * self.ctx.u(j) / u_old
            };
            base + self.rho_term(j, self.pf_x, f_pred)
        });

        let c = &prep.c;
        let f_plus = loop {
            let Some(ev) = self.eval_f(c, pf)? else {
                if pf < self.top {
                    self.flag("objective_overflow");
                    pf += 1;
                    continue;
                }
                return Ok(Flow::Reject("objective_overflow"));
            };
            if self.relaxed() && ev.underflow && pf < self.top {
                self.counters.demote(EvalKind::Objective, pf);
                self.flag("objective_underflow");
                pf += 1;
                continue;
            }
            let err = ev.omega + self.rho_term(pf, self.pf_x, ev.value.to_defined());
            if err <= bound {
                break ev;
            }
            if pf < self.top {
                self.counters.demote(EvalKind::Objective, pf);
                self.flag("objective_escalated");
                pf += 1;
                continue;
            }
            if self.guaranteed() {
                return Ok(Flow::End(
                    Status::PrecisionFailure,
                    "candidate objective error exceeds eta0 * delta_t in every format".into(),
                ));
            }
            break ev;
        };

        // Re-evaluate f(x̂) when its error is too large for this decrease.
        let err_x = self.f_omega + self.rho_term(pf, self.pf_x, f_prev);
        if err_x > bound {
            if self.pf_x == self.top {
                if self.guaranteed() {
                    return Ok(Flow::End(
                        Status::PrecisionFailure,
                        "objective error exceeds eta0 * delta_t in every format".into(),
                    ));
                }
            } else {
                self.flag("objective_reevaluated");
                let pf_old = self.pf_x;
                let mut j = first_passing(self.ctx, pf_old + 1, bound, |j| {
                    let base = if u_old.is_zero() {
                        DefinedReal::ZERO
                    } else {
                        self.f_omega * self.ctx.u(j) / u_old
                    };
                    base + self.rho_term(pf, j, f_prev)
                });
                let x = self.x.clone();
                loop {
                    let ev = self.eval_f(&x, j)?;
                    let ok = match ev {
                        Some(ev) if !(self.relaxed() && ev.underflow && j < self.top) => {
                            self.counters.demote(EvalKind::Objective, self.pf_x);
                            self.f = ev.value.value();
                            self.f_omega = ev.omega;
                            self.pf_x = j;
                            self.f_omega + self.rho_term(pf, j, ev.value.to_defined()) <= bound
                        }
                        Some(_) => {
                            self.counters.demote(EvalKind::Objective, j);
                            false
                        }
                        None => false,
                    };
                    if ok {
                        break;
                    }
                    if j < self.top {
                        j += 1;
                        continue;
                    }
                    if self.guaranteed() {
                        return Ok(Flow::End(
                            Status::PrecisionFailure,
                            "objective error exceeds eta0 * delta_t in every format".into(),
                        ));
                    }
                    break;
                }
            }
        }
        Ok(Flow::Go((f_plus, pf)))
    }

    fn record(
        &mut self,
        x: Option<Vec<f64>>,
        pf: Option<usize>,
        delta_t: f64,
        mu: f64,
        rho: Option<f64>,
        accepted: bool,
    ) {
        if !self.cfg.record_trace {
            return;
        }
        let name = |i: usize| self.stack.get(i).name().to_string();
        self.trace.push(IterRecord {
            k: self.k,
            pi_x: name(self.px),
            pi_g: name(self.pg),
            pi_c: name(self.pc),
            pi_f: pf.map(name),
            sigma: self.sigma,
            gnorm: self
                .grad
                .as_ref()
                .map_or(self.last_gnorm, |g| g.gnorm.value()),
            delta_t,
            mu,
            rho,
            accepted,
            flags: self.flags.clone(),
            x,
        });
    }

    fn finish(mut self, status: Status, detail: String, warnings: Vec<String>) -> RunReport {
        self.monitor.finish(self.successful);
        let certified = (status == Status::FirstOrder)
            .then(|| certify_first_order(self.p, self.x.values(), self.cfg.eps).holds);
        let effort = EffortSummary::of(&self.counters, &EffortModel::default());
        RunReport {
            problem: self.p.name().to_string(),
            n: self.p.dim(),
            mode: self.cfg.mode,
            status,
            detail: (!detail.is_empty()).then_some(detail),
            iterations: self.k,
            successful: self.successful,
            x: self.x.values().to_vec(),
            x_format: self.fmt(self.px).name().to_string(),
            f: self.f,
            gnorm: self.last_gnorm,
            sigma: self.sigma,
            counters: self.counters,
            effort,
            certified,
            warnings,
            violations: std::mem::take(&mut self.monitor.violations),
            trace: self.trace,
        }
    }
}
