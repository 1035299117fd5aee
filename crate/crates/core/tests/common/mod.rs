//! Oracles and checks shared by the integration tests.

#![allow(dead_code)]

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use mpr2::defined::DefinedReal;
use mpr2::errbounds::{lambda_k, mu_from_parts, u_prime, ErrorContext, GammaFormula};
use mpr2::evalmodel::{defined_gradient, rat};
use mpr2::fpenv::{fp_dot, fp_norm, FormatStack, FpFormat, TaggedVector};
use mpr2::harness::{read_profile_csv, run_suite, SolverSpec, SuiteReport};
use mpr2::problems::default_suite;
use mpr2::solver::{
    certify_first_order, compute_candidate, compute_step, model_decrease, solve, SolverConfig,
    SolverMode, Status,
};

pub type Check = Result<String, String>;

pub const FORMATS: [FpFormat; 3] = [FpFormat::HALF, FpFormat::SINGLE, FpFormat::DOUBLE];

/// A random value of `fmt` with magnitude in `[2^lo, 2^hi]`.
pub fn random_in(rng: &mut ChaCha8Rng, fmt: FpFormat, lo: i32, hi: i32) -> f64 {
    let m: f64 = rng.gen_range(1.0..2.0);
    let e = rng.gen_range(lo..hi);
    let sign = if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
    fmt.round_nearest(sign * m * 2f64.powi(e))
        .expect("in range")
        .value
}

pub fn random_vec(rng: &mut ChaCha8Rng, fmt: FpFormat, n: usize, lo: i32, hi: i32) -> TaggedVector {
    let v = (0..n).map(|_| random_in(rng, fmt, lo, hi)).collect();
    TaggedVector::new(v, fmt).expect("representable")
}

pub fn defined_rat(d: DefinedReal) -> BigRational {
    rat(d.hi()) + rat(d.lo())
}

/// `x * 2^k` as an integer; panics when `x` is not a multiple of `2^-k`.
fn grid(x: f64, k: i32) -> i128 {
    if x == 0.0 {
        return 0;
    }
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1u64 << 52) - 1)) as i128;
    let (mant, e) = if biased == 0 {
        (frac, -1074)
    } else {
        (frac | (1i128 << 52), biased - 1075)
    };
    let shift = e + k;
    let v = if shift >= 0 {
        assert!(shift < 74, "{x} is too large for the grid");
        mant << shift
    } else {
        assert!(mant % (1i128 << -shift) == 0, "{x} is off the grid");
        mant >> -shift
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn scaled(x: f64) -> i128 {
    grid(x, 55)
}

fn sq_norm(v: &[BigRational]) -> BigRational {
    v.iter().fold(BigRational::zero(), |a, x| a + x * x)
}

fn rats(v: &[f64]) -> Vec<BigRational> {
    v.iter().map(|&x| rat(x)).collect()
}

/// Dot products and norms of random vectors against exact integer oracles.
pub fn dot_norm_bounds(trials: usize, seed: u64) -> Check {
    let mut rng = rand::SeedableRng::seed_from_u64(seed);
    let mut checked = 0usize;
    let mut skipped = 0usize;
    let mut worst = 0f64;
    for fmt in FORMATS {
        for n in [1usize, 2, 4, 8, 16, 64] {
            let stack = FormatStack::default();
            let ctx =
                ErrorContext::new(n, GammaFormula::default(), &stack).map_err(|e| e.to_string())?;
            let b = ctx.of(fmt);
            let gamma = defined_rat(b.gamma_n);
            let beta = defined_rat(b.beta_n2);
            let one = BigRational::from_integer(1.into());
            for _ in 0..trials {
                let x = random_vec(&mut rng, fmt, n, -3, 3);
                let y = random_vec(&mut rng, fmt, n, -3, 3);
                let d = fp_dot(&x, &y).map_err(|e| e.to_string())?;
                let nx = fp_norm(&x).map_err(|e| e.to_string())?;
                if d.underflow || nx.underflow {
                    skipped += 1;
                    continue;
                }
                let (mut exact, mut abs, mut sq) = (0i128, 0i128, 0i128);
                for (&a, &c) in x.values().iter().zip(y.values()) {
                    let p = scaled(a) * scaled(c);
                    exact += p;
                    abs += p.abs();
                    sq += scaled(a) * scaled(a);
                }
                let err = (grid(d.value.value(), 110) - exact).abs();
                let err = BigRational::from_integer(BigInt::from(err));
                let bound = &gamma * BigRational::from_integer(BigInt::from(abs));
                if err > bound {
                    return Err(format!(
                        "dot bound violated in {} with n = {n}: x = {:?}, y = {:?}",
                        fmt.name(),
                        x.values(),
                        y.values()
                    ));
                }
                if abs > 0 {
                    let r = num_traits::ToPrimitive::to_f64(&(err / bound.clone())).unwrap_or(0.0);
                    if bound > BigRational::zero() {
                        worst = worst.max(r);
                    }
                }
                // |q - ‖x‖| <= q β  <=>  q²(1-β)² <= ‖x‖² <= q²(1+β)²
                let q = scaled(nx.value.value());
                let q2 = BigRational::from_integer(BigInt::from(q * q));
                let s = BigRational::from_integer(BigInt::from(sq));
                let lo = &q2 * (&one - &beta) * (&one - &beta);
                let hi = &q2 * (&one + &beta) * (&one + &beta);
                if s < lo || s > hi {
                    return Err(format!(
                        "norm bound violated in {} with n = {n}: x = {:?}",
                        fmt.name(),
                        x.values()
                    ));
                }
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{checked} dot/norm pairs, {skipped} skipped for underflow, worst dot error {worst:.3} of its bound"
    ))
}

/// Randomized step computations: gradient perturbation, model decrease and
/// actual step length against exact rational arithmetic.
pub fn step_bounds(trials: usize, seed: u64) -> Check {
    let mut rng: ChaCha8Rng = rand::SeedableRng::seed_from_u64(seed);
    let stack = FormatStack::default();
    let one = BigRational::from_integer(1.into());
    let mut checked = 0usize;
    for (gi, gfmt) in FORMATS.iter().copied().enumerate() {
        let mut done = 0usize;
        let mut attempts = 0usize;
        while done < trials {
            attempts += 1;
            if attempts > 20 * trials {
                return Err(format!("too many degenerate draws in {}", gfmt.name()));
            }
            let n = rng.gen_range(1..=16usize);
            let ctx =
                ErrorContext::new(n, GammaFormula::default(), &stack).map_err(|e| e.to_string())?;
            let g = random_vec(&mut rng, gfmt, n, -3, 3);
            let sigma = if rng.gen_bool(0.5) {
                2f64.powi(rng.gen_range(-3..=3))
            } else {
                random_in(&mut rng, gfmt, -3, 3).abs()
            };
            let Ok(s) = compute_step(&g, sigma) else {
                continue;
            };
            let Ok(dt) = model_decrease(&g, &s.value) else {
                continue;
            };
            if s.underflow || dt.underflow {
                continue;
            }
            let u = defined_rat(ctx.u(gi));
            let gr = rats(g.values());
            let gt: Vec<BigRational> = s
                .value
                .values()
                .iter()
                .map(|&v| -rat(sigma) * rat(v))
                .collect();
            let diff: Vec<BigRational> = gr.iter().zip(&gt).map(|(a, b)| a - b).collect();
            let (g2, gt2) = (sq_norm(&gr), sq_norm(&gt));
            if sq_norm(&diff) > &u * &u * &g2 || gt2 < (&one - &u) * (&one - &u) * &g2 {
                return Err(format!(
                    "gradient perturbation bound violated: g = {:?}, sigma = {sigma}",
                    g.values()
                ));
            }
            let dtr = rat(dt.value.value());
            if dtr < BigRational::zero() {
                return Err(format!("negative model decrease: g = {:?}", g.values()));
            }
            let gamma = defined_rat(ctx.at(gi).gamma_n1);
            let bet = &gt2 / rat(sigma);
            if (&dtr - &bet).abs() > &gamma * &bet {
                return Err(format!(
                    "model decrease off by more than gamma_(n+1): g = {:?}, sigma = {sigma}",
                    g.values()
                ));
            }

            // candidate from an iterate stored at or below the step format
            let xi = rng.gen_range(0..=gi);
            let ci = rng.gen_range(0..=gi);
            let x = random_vec(&mut rng, FORMATS[xi], n, -2, 4);
            let Ok(c) = compute_candidate(&x, &s.value, FORMATS[ci]) else {
                continue;
            };
            let (Ok(nx), Ok(ns)) = (fp_norm(&x), fp_norm(&s.value)) else {
                continue;
            };
            if c.underflow || nx.underflow || ns.underflow {
                continue;
            }
            let Ok(phi) = ctx.phi_bound(nx.value, ns.value) else {
                continue;
            };
            if !phi.is_finite() {
                continue;
            }
            let lambda = lambda_k(phi, u_prime(ctx.u(gi), ctx.u(ci)));
            let l = defined_rat(lambda);
            let actual: Vec<BigRational> = c
                .value
                .values()
                .iter()
                .zip(x.values())
                .map(|(&a, &b)| rat(a) - rat(b))
                .collect();
            let s2 = sq_norm(&rats(s.value.values()));
            if sq_norm(&actual) > s2 * (&one + &l) * (&one + &l) {
                return Err(format!(
                    "actual step longer than (1 + lambda) |s|: x = {:?}, s = {:?}",
                    x.values(),
                    s.value.values()
                ));
            }
            done += 1;
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} step computations across {} formats",
        FORMATS.len()
    ))
}

/// With every roundoff zero, `μ` collapses to `ω_g`.
pub fn mu_degeneration(trials: usize, seed: u64) -> Check {
    let mut rng: ChaCha8Rng = rand::SeedableRng::seed_from_u64(seed);
    let tol = 2f64.powi(-90);
    let mut worst = 0f64;
    for _ in 0..trials {
        let n = rng.gen_range(1..=64usize);
        let ctx = ErrorContext::exact(n, &FormatStack::default());
        let omega =
            DefinedReal::from(rng.gen_range(0.0..1.0)) * DefinedReal::from(rng.gen_range(0.0..1.0));
        let phi = DefinedReal::from(2f64.powf(rng.gen_range(-20.0..40.0)));
        let lambda = lambda_k(phi, u_prime(DefinedReal::ZERO, DefinedReal::ZERO));
        for g in 0..3 {
            let b = ctx.at(g);
            let direct = ctx.mu_k(g, omega, lambda);
            let parts = mu_from_parts(b.u, b.alpha_n1, b.gamma_n1, omega, lambda);
            for mu in [direct, parts] {
                let rel = if omega.is_zero() {
                    mu.abs().to_f64()
                } else {
                    ((mu - omega) / omega).abs().to_f64()
                };
                worst = worst.max(rel);
                if rel > tol {
                    return Err(format!("mu = {mu} differs from omega = {omega} by {rel:e}"));
                }
            }
        }
    }
    Ok(format!(
        "{trials} inputs, worst relative difference {worst:e}"
    ))
}

/// Exact-mode MPR2 on a binary64-only stack against R2, iterate by iterate.
pub fn equivalence_with_r2() -> Check {
    let mut compared = 0usize;
    for p in default_suite() {
        let mut exact = SolverConfig::with_mode(SolverMode::Exact);
        exact.formats = FormatStack::double_only();
        exact.record_trace = true;
        exact.record_iterates = true;
        let mut r2 = exact.clone();
        r2.mode = SolverMode::R2;
        let a = solve(&p, &exact).map_err(|e| e.to_string())?;
        let b = solve(&p, &r2).map_err(|e| e.to_string())?;
        let xa: Vec<_> = a.trace.iter().map(|t| bits(t.x.as_deref())).collect();
        let xb: Vec<_> = b.trace.iter().map(|t| bits(t.x.as_deref())).collect();
        if xa != xb
            || bits(Some(a.x.as_slice())) != bits(Some(b.x.as_slice()))
            || a.status != b.status
        {
            let k = xa.iter().zip(&xb).position(|(u, v)| u != v);
            return Err(format!(
                "{}: sequences differ (first mismatch at {k:?}, {} vs {} records, {} vs {})",
                p.name(),
                xa.len(),
                xb.len(),
                a.status,
                b.status
            ));
        }
        compared += xa.len();
    }
    Ok(format!("{compared} iterates identical"))
}

fn bits(x: Option<&[f64]>) -> Vec<u64> {
    x.unwrap_or(&[]).iter().map(|v| v.to_bits()).collect()
}

pub fn guaranteed_suite(eta0: f64) -> SuiteReport {
    let cfg = SolverConfig {
        eta0,
        check_invariants: true,
        ..SolverConfig::with_mode(SolverMode::Guaranteed)
    };
    let spec = SolverSpec {
        label: SolverMode::Guaranteed.as_str().to_string(),
        cfg,
    };
    run_suite(&[spec], &default_suite())
}

/// Every first-order exit re-checked outside the solver.
pub fn stopping_soundness(report: &SuiteReport) -> Check {
    let problems = default_suite();
    let mut count = 0usize;
    for r in &report.solvers[0].runs {
        if r.status != Status::FirstOrder {
            continue;
        }
        let p = problems
            .iter()
            .find(|p| p.name() == r.problem)
            .expect("suite problem");
        let eps = SolverConfig::default().eps;
        let (_, g) = defined_gradient(p, &r.x).map_err(|e| format!("{}: {e}", r.problem))?;
        let norm = g.iter().map(|v| v.sqr()).sum::<DefinedReal>().sqrt();
        if !(norm <= eps) {
            return Err(format!("{}: |g| = {norm} > eps", r.problem));
        }
        let cert = certify_first_order(p, &r.x, eps);
        if !cert.holds || r.certified != Some(true) {
            return Err(format!("{}: certificate failed ({cert:?})", r.problem));
        }
        count += 1;
    }
    if count == 0 {
        return Err("no first-order exits".to_string());
    }
    Ok(format!("{count} first-order exits certified"))
}

pub fn invariant_violations(reports: &[&SuiteReport]) -> Check {
    let mut runs = 0usize;
    for rep in reports {
        for r in &rep.solvers[0].runs {
            if let Some(v) = r.violations.first() {
                return Err(format!("{}: {v}", r.problem));
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} monitored runs, no violations"))
}

fn share(shares: &[mpr2::harness::FormatShare], pred: impl Fn(u32) -> bool) -> f64 {
    shares
        .iter()
        .filter(|s| pred(s.bits))
        .map(|s| s.percent)
        .sum()
}

pub fn format_pattern(report: &SuiteReport) -> Check {
    let s = &report.summaries[0];
    let pf = s.statuses.precision_failure;
    let grad_low = share(&s.gradient, |b| b <= 32);
    let obj64 = share(&s.objective, |b| b == 64);
    let grad64 = share(&s.gradient, |b| b == 64);
    let detail = format!(
        "F = {pf}, gradient <= 32-bit {grad_low:.1}%, 64-bit objective {obj64:.1}% vs gradient {grad64:.1}%"
    );
    if pf > 0 && grad_low > 50.0 && obj64 > grad64 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn relaxed_suite() -> (SuiteReport, f64) {
    let base = SolverConfig::default();
    let specs: Vec<SolverSpec> = ["r2", "relaxed", "relaxed:0.1", "relaxed:0.01"]
        .iter()
        .map(|s| SolverSpec::parse(s, &base).expect("valid solver"))
        .collect();
    let t = Instant::now();
    let report = run_suite(&specs, &default_suite());
    (report, t.elapsed().as_secs_f64())
}

pub fn effort_versus_r2(report: &SuiteReport, seconds: f64) -> Check {
    let r2 = &report.summaries[0];
    let relaxed = &report.summaries[1];
    let c = relaxed
        .versus_baseline
        .as_ref()
        .ok_or("no comparison against r2")?;
    let r = &c.ratios;
    let detail = format!(
        "gradient time {:.3}, gradient energy {:.3}, objective time {:.3}, solved {} vs {}, {seconds:.1} s",
        r.gradient_time,
        r.gradient_energy,
        r.objective_time,
        relaxed.statuses.first_order,
        r2.statuses.first_order
    );
    let solved_ok = relaxed.statuses.first_order as f64 >= 0.85 * r2.statuses.first_order as f64;
    if r.gradient_time <= 0.9
        && r.gradient_energy <= 0.8
        && r.objective_time <= 0.95
        && solved_ok
        && seconds < 600.0
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn relaxation_monotone(report: &SuiteReport) -> Check {
    let shares: Vec<f64> = report.summaries[1..]
        .iter()
        .map(|s| share(&s.gradient, |b| b <= 16))
        .collect();
    let detail = format!(
        "<= 16-bit gradient share for a = 1, 0.1, 0.01: {}",
        shares
            .iter()
            .map(|v| format!("{v:.1}%"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    if shares.windows(2).all(|w| w[0] <= w[1]) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_cli(bin: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "mpr2 {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

pub const FIXTURE: &str = "\
solver,problem,n,status,iterations,successful,f,gnorm,objective_evals,gradient_evals,objective_time,objective_energy,gradient_time,gradient_energy,objective_by_format,gradient_by_format
a,p1,2,first_order,3,3,0,0,4,3,0.5,0.25,0.5,0.25,double=4/4,double=3/3
b,p1,2,first_order,3,3,0,0,4,3,1,1,1,1,double=4/4,double=3/3
a,p2,2,first_order,3,3,0,0,4,3,2,4,2,4,double=4/4,double=3/3
b,p2,2,first_order,3,3,0,0,4,3,1,1,1,1,double=4/4,double=3/3
a,p3,2,first_order,3,3,0,0,4,3,1.5,1,1.5,1,double=4/4,double=3/3
b,p3,2,max_iter,3,3,,,4,3,1,1,1,1,double=4/4,double=3/3
";

/// Profile values of [`FIXTURE`] worked out by hand: costs a = (1, 4, 3),
/// b = (2, 2, inf), so ratios a = (1, 2, 1) and b = (2, 1, inf).
pub fn fixture_expected(solver: &str, tau: f64) -> f64 {
    match (solver, tau < 2.0) {
        ("a", true) => 2.0 / 3.0,
        ("a", false) => 1.0,
        ("b", true) => 1.0 / 3.0,
        ("b", false) => 2.0 / 3.0,
        _ => panic!("unknown solver {solver}"),
    }
}

/// `bench` then `profile` through the binary, plus the hand-built fixture.
pub fn cli_contract(bin: &Path, dir: &Path) -> Check {
    let bench = dir.join("bench");
    let prof = dir.join("profile.csv");
    let b = bench.to_str().unwrap();
    let suite = "quadratic,rosenbrock,bard,matyas";
    run_cli(
        bin,
        &["bench", "--suite", suite, "--modes", "relaxed", "--out", b],
    )?;
    run_cli(
        bin,
        &["profile", "--in", b, "--out", prof.to_str().unwrap()],
    )?;
    let rows = read_profile_csv(std::fs::File::open(&prof).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    if rows.len() != 41 {
        return Err(format!("single-solver profile has {} rows", rows.len()));
    }
    if let Some(r) = rows.iter().find(|r| r.2 != 1.0) {
        return Err(format!("single-solver profile is {} at tau = {}", r.2, r.1));
    }

    let two = dir.join("bench2");
    let b2 = two.to_str().unwrap();
    let prof2 = dir.join("profile2.csv");
    run_cli(
        bin,
        &[
            "bench",
            "--suite",
            suite,
            "--modes",
            "r2,relaxed",
            "--out",
            b2,
        ],
    )?;
    run_cli(
        bin,
        &["profile", "--in", b2, "--out", prof2.to_str().unwrap()],
    )?;
    let rows2 = read_profile_csv(std::fs::File::open(&prof2).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    if rows2.len() != 82 || rows2.iter().any(|r| r.0 != "r2" && r.0 != "mpr2_relaxed") {
        return Err("two-solver profile has the wrong shape".to_string());
    }

    let fixture = dir.join("fixture.csv");
    std::fs::write(&fixture, FIXTURE).map_err(|e| e.to_string())?;
    let prof3 = dir.join("profile3.csv");
    run_cli(
        bin,
        &[
            "profile",
            "--in",
            fixture.to_str().unwrap(),
            "--out",
            prof3.to_str().unwrap(),
        ],
    )?;
    let rows3 = read_profile_csv(std::fs::File::open(&prof3).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    if rows3.len() != 82 {
        return Err(format!("fixture profile has {} rows", rows3.len()));
    }
    for (s, tau, frac) in &rows3 {
        let want = fixture_expected(s, *tau);
        if *frac != want {
            return Err(format!(
                "fixture: {s} at tau = {tau} is {frac}, expected {want}"
            ));
        }
    }
    Ok("bench/profile schema valid, single solver identically 1, fixture exact".to_string())
}
