use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// `costs[problem][solver]`, `+inf` for an unsolved problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub solvers: Vec<String>,
    pub problems: Vec<String>,
    pub costs: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileData {
    pub taus: Vec<f64>,
    pub solvers: Vec<String>,
    /// `fractions[solver][tau]`.
    pub fractions: Vec<Vec<f64>>,
    /// Problems solved by at least one solver.
    pub problems_used: usize,
}

/// `2^(i/4)` for `i = 0..=40`, i.e. 1 to 1024.
pub fn tau_grid() -> Vec<f64> {
    (0..=40).map(|i| 2f64.powf(i as f64 / 4.0)).collect()
}

/// Fraction of problems each solver solves within a factor `τ` of the best.
/// Problems no solver solved are left out.
pub fn performance_profile(costs: &CostMatrix) -> ProfileData {
    let taus = tau_grid();
    let ns = costs.solvers.len();
    let mut ratios: Vec<Vec<f64>> = vec![Vec::new(); ns];
    for row in &costs.costs {
        let best = row.iter().cloned().fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            continue;
        }
        for (s, &c) in row.iter().enumerate() {
            let r = if c == best { 1.0 } else { c / best };
            ratios[s].push(r);
        }
    }
    let used = ratios.first().map_or(0, |r| r.len());
    let fractions = ratios
        .iter()
        .map(|rs| {
            taus.iter()
                .map(|&t| {
                    if used == 0 {
                        0.0
                    } else {
                        rs.iter().filter(|&&r| r <= t).count() as f64 / used as f64
                    }
                })
                .collect()
        })
        .collect();
    ProfileData {
        taus,
        solvers: costs.solvers.clone(),
        fractions,
        problems_used: used,
    }
}

#[derive(Serialize, Deserialize)]
struct ProfileRow {
    solver: String,
    tau: f64,
    fraction: f64,
}

/// Columns `solver,tau,fraction`, one row per solver and grid point.
pub fn write_profile_csv<W: Write>(data: &ProfileData, w: W) -> Result<(), HarnessError> {
    let mut wr = csv::Writer::from_writer(w);
    if data.solvers.is_empty() {
        wr.write_record(["solver", "tau", "fraction"])?;
    }
    for (s, fr) in data.solvers.iter().zip(&data.fractions) {
        for (&tau, &fraction) in data.taus.iter().zip(fr) {
            wr.serialize(ProfileRow {
                solver: s.clone(),
                tau,
                fraction,
            })?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Rows `(solver, tau, fraction)`; fails on a wrong header.
pub fn read_profile_csv<R: Read>(r: R) -> Result<Vec<(String, f64, f64)>, HarnessError> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["solver", "tau", "fraction"] {
        return Err(HarnessError::Malformed(format!(
            "unexpected profile header {headers:?}"
        )));
    }
    let mut out = Vec::new();
    for row in rd.deserialize() {
        let row: ProfileRow = row?;
        if !(0.0..=1.0).contains(&row.fraction) || row.tau < 1.0 {
            return Err(HarnessError::Malformed(format!(
                "profile row out of range: {} {} {}",
                row.solver, row.tau, row.fraction
            )));
        }
        out.push((row.solver, row.tau, row.fraction));
    }
    Ok(out)
}
