use crate::fpenv::{FormatStack, FpFormat};
use crate::solver::SolverConfig;

use super::HarnessError;

fn bad(key: &str, value: &str) -> HarnessError {
    HarnessError::Config(format!("bad value `{value}` for `{key}`"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value.parse().map_err(|_| bad(key, value))
}

fn flag(key: &str, value: &str) -> Result<bool, HarnessError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

/// Comma-separated format names, lowest precision first.
pub fn parse_formats(value: &str) -> Result<FormatStack, HarnessError> {
    let formats = value
        .split(',')
        .map(|s| match s.trim() {
            "half" | "float16" | "fp16" => Ok(FpFormat::HALF),
            "single" | "float32" | "fp32" => Ok(FpFormat::SINGLE),
            "double" | "float64" | "fp64" => Ok(FpFormat::DOUBLE),
            "bfloat16" | "bf16" => Ok(FpFormat::BFLOAT16),
            other => Err(HarnessError::Config(format!("unknown format `{other}`"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    FormatStack::new(formats).map_err(|e| HarnessError::Config(e.to_string()))
}

/// Set one `SolverConfig` field by name.
pub fn apply_setting(cfg: &mut SolverConfig, key: &str, value: &str) -> Result<(), HarnessError> {
    let value = value.trim();
    match key.trim() {
        "eta0" => cfg.eta0 = num(key, value)?,
        "eta1" => cfg.eta1 = num(key, value)?,
        "eta2" => cfg.eta2 = num(key, value)?,
        "gamma1" => cfg.gamma1 = num(key, value)?,
        "gamma2" => cfg.gamma2 = num(key, value)?,
        "gamma3" => cfg.gamma3 = num(key, value)?,
        "kappa_mu" => cfg.kappa_mu = num(key, value)?,
        "sigma0" => cfg.sigma0 = num(key, value)?,
        "sigma_min" => cfg.sigma_min = num(key, value)?,
        "eps" => cfg.eps = num(key, value)?,
        "max_iter" => cfg.max_iter = num(key, value)?,
        "mode" => cfg.mode = value.parse().map_err(|_| bad(key, value))?,
        "relax_a" => cfg.relax_a = num(key, value)?,
        "gamma_formula" => cfg.gamma_formula = value.parse().map_err(|_| bad(key, value))?,
        "rho_correction" => cfg.rho_correction = flag(key, value)?,
        "allow_unit_gamma2" => cfg.allow_unit_gamma2 = flag(key, value)?,
        "check_invariants" => cfg.check_invariants = flag(key, value)?,
        "formats" => cfg.formats = parse_formats(value)?,
        other => return Err(HarnessError::Config(format!("unknown key `{other}`"))),
    }
    Ok(())
}

/// Flat `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str, base: SolverConfig) -> Result<SolverConfig, HarnessError> {
    let mut cfg = base;
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", i + 1)))?;
        apply_setting(&mut cfg, k, v)?;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SolverMode;

    #[test]
    fn parses_file() {
        let text = "# comment\neta0 = 0.04\nmode=relaxed\nrelax_a = 0.5 # trailing\nformats = half, double\nrho_correction = true\n";
        let cfg = parse_config(text, SolverConfig::default()).unwrap();
        assert_eq!(cfg.eta0, 0.04);
        assert_eq!(cfg.mode, SolverMode::Relaxed);
        assert_eq!(cfg.relax_a, 0.5);
        assert_eq!(cfg.formats.len(), 2);
        assert!(cfg.rho_correction);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_config("eta0 0.1", SolverConfig::default()).is_err());
        assert!(parse_config("foo = 1", SolverConfig::default()).is_err());
        assert!(parse_config("eps = x", SolverConfig::default()).is_err());
        assert!(parse_config("formats = double, half", SolverConfig::default()).is_err());
    }
}
