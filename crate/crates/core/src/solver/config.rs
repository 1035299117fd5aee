use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::errbounds::GammaFormula;
use crate::evalmodel::ErrorMode;
use crate::fpenv::{pow2, FormatStack};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0} is violated")]
    Violated(&'static str),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Which algorithm to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverMode {
    /// Single-format baseline, no rounding-error terms.
    R2,
    /// Interval-based error bounds; halts when no format is accurate enough.
    Guaranteed,
    /// Relative error model; never halts for lack of precision.
    Relaxed,
    /// Every error source set to zero. Only meaningful on a single-format
    /// stack, since coarse evaluations are trusted as exact.
    Exact,
}

impl SolverMode {
    pub fn error_mode(&self) -> ErrorMode {
        match self {
            SolverMode::Guaranteed => ErrorMode::Guaranteed,
            SolverMode::Relaxed => ErrorMode::Relaxed,
            SolverMode::R2 | SolverMode::Exact => ErrorMode::Exact,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SolverMode::R2 => "r2",
            SolverMode::Guaranteed => "mpr2_guaranteed",
            SolverMode::Relaxed => "mpr2_relaxed",
            SolverMode::Exact => "mpr2_exact",
        }
    }
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverMode {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "r2" => Ok(SolverMode::R2),
            "mpr2_guaranteed" | "guaranteed" => Ok(SolverMode::Guaranteed),
            "mpr2_relaxed" | "relaxed" => Ok(SolverMode::Relaxed),
            "mpr2_exact" | "exact" => Ok(SolverMode::Exact),
            other => Err(ConfigError::Invalid(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub eta0: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub kappa_mu: f64,
    pub sigma0: f64,
    pub sigma_min: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub mode: SolverMode,
    /// Relaxation factor `a` in `a * mu <= kappa_mu` (relaxed mode).
    pub relax_a: f64,
    pub gamma_formula: GammaFormula,
    /// Account for the rounding of `rho` computed in working precision.
    pub rho_correction: bool,
    /// Accept `gamma2 = 1`.
    pub allow_unit_gamma2: bool,
    pub formats: FormatStack,
    /// Check the convergence-theory invariants online (guaranteed mode).
    pub check_invariants: bool,
    /// Keep one record per iteration in the report.
    pub record_trace: bool,
    /// Include iterates in trace records.
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta0: 0.05,
            eta1: 0.1,
            eta2: 0.7,
            gamma1: 0.5,
            gamma2: 2.0,
            gamma3: 2.0,
            kappa_mu: 0.2,
            sigma0: 1.0,
            sigma_min: pow2(-52),
            eps: 1.5e-8,
            max_iter: 10_000,
            mode: SolverMode::Guaranteed,
            relax_a: 1.0,
            gamma_formula: GammaFormula::Linear,
            rho_correction: false,
            allow_unit_gamma2: false,
            formats: FormatStack::default(),
            check_invariants: false,
            record_trace: false,
            record_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn with_mode(mode: SolverMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

fn is_pow2(x: f64) -> bool {
    x.is_finite() && x > 0.0 && x == pow2(crate::fpenv::exponent(x))
}

// Slack for non-strict comparisons of decimal parameters stored in binary.
const SLACK: f64 = 1e-12;

/// Check the parameter conditions; returns warnings for accepted borderline
/// values.
pub fn validate_params(cfg: &SolverConfig) -> Result<Vec<String>, ConfigError> {
    use ConfigError::Violated;
    let mut warnings = Vec::new();
    if !(0.0 < cfg.eta1 && cfg.eta1 <= cfg.eta2 && cfg.eta2 < 1.0) {
        return Err(Violated("0 < eta1 <= eta2 < 1"));
    }
    if !(0.0 < cfg.gamma1 && cfg.gamma1 < 1.0) {
        return Err(Violated("0 < gamma1 < 1"));
    }
    if cfg.gamma2 == 1.0 && cfg.allow_unit_gamma2 {
        warnings.push("gamma2 = 1 accepted by override".to_string());
    } else if !(1.0 < cfg.gamma2) {
        return Err(Violated("1 < gamma2"));
    }
    if !(cfg.gamma2 <= cfg.gamma3) {
        return Err(Violated("gamma2 <= gamma3"));
    }
    if !(cfg.eta0 > 0.0) {
        return Err(Violated("eta0 > 0"));
    }
    let half_eta1 = 0.5 * cfg.eta1;
    if cfg.eta0 > half_eta1 * (1.0 + SLACK) {
        return Err(Violated("eta0 < eta1 / 2"));
    }
    if cfg.eta0 >= half_eta1 * (1.0 - SLACK) {
        warnings.push(format!(
            "eta0 = {} equals eta1 / 2; the strict inequality is relaxed",
            cfg.eta0
        ));
    }
    if !(cfg.kappa_mu > 0.0) {
        return Err(Violated("kappa_mu > 0"));
    }
    if cfg.eta0 + 0.5 * cfg.kappa_mu > 0.5 * (1.0 - cfg.eta2) * (1.0 + SLACK) {
        return Err(Violated("eta0 + kappa_mu / 2 <= (1 - eta2) / 2"));
    }
    if !is_pow2(cfg.sigma0) {
        return Err(Violated("sigma0 is a power of two"));
    }
    if !is_pow2(cfg.sigma_min) {
        return Err(Violated("sigma_min is a power of two"));
    }
    if !is_pow2(cfg.gamma1) || !is_pow2(cfg.gamma3) {
        return Err(Violated("gamma1 and gamma3 are powers of two"));
    }
    if !(cfg.eps > 0.0 && cfg.eps.is_finite()) {
        return Err(Violated("eps > 0"));
    }
    if cfg.max_iter == 0 {
        return Err(Violated("max_iter > 0"));
    }
    if !(cfg.relax_a > 0.0 && cfg.relax_a <= 1.0) {
        return Err(Violated("0 < relax_a <= 1"));
    }
    Ok(warnings)
}
