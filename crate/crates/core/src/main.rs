use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mpr2::errbounds::GammaFormula;
use mpr2::harness::{
    apply_setting, cost_matrix_from_runs_csv, emit_report, parse_config, performance_profile,
    run_suite, write_profile_csv, HarnessError, ReportFormat, SolverSpec,
};
use mpr2::problems::{default_suite, get_problem, problem_names, registry};
use mpr2::solver::{solve, validate_params, write_trace_jsonl, SolverConfig, SolverMode, Status};

const EXIT_IO: u8 = 1;
const EXIT_PRECISION: u8 = 2;
const EXIT_MAX_ITER: u8 = 3;
const EXIT_CONFIG: u8 = 4;
const EXIT_STALLED: u8 = 5;

#[derive(Parser)]
#[command(
    name = "mpr2",
    version,
    about = "Multi-precision quadratic regularization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// key = value file with solver settings; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    sigma0: Option<f64>,
    /// nu, nu/(1-nu) or nu/(1-nu/2)
    #[arg(long)]
    gamma_formula: Option<GammaFormula>,
    #[arg(long)]
    relax_a: Option<f64>,
    #[arg(long)]
    rho_correction: bool,
    /// Comma-separated format stack, lowest precision first
    #[arg(long)]
    formats: Option<String>,
    /// Check the convergence invariants during guaranteed runs
    #[arg(long)]
    check_invariants: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem
    Solve {
        problem: String,
        /// Dimension (default: the suite dimension)
        #[arg(long)]
        n: Option<usize>,
        /// r2, guaranteed, relaxed or exact
        #[arg(long, default_value = "guaranteed")]
        mode: String,
        /// Write one JSON record per iteration
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Print the full report as JSON
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run a suite under several solvers and write reports
    Bench {
        /// Comma-separated problem names (default: the whole suite)
        #[arg(long)]
        suite: Option<String>,
        /// Comma-separated solvers, e.g. r2,guaranteed,relaxed:0.1
        #[arg(long, default_value = "r2,guaranteed,relaxed")]
        modes: String,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Performance profile from a bench directory
    Profile {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the built-in problems
    List,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Io(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(m) => CliError::Config(m),
            other => CliError::Io(other.to_string()),
        }
    }
}

fn build_config(common: &Common, mode: Option<SolverMode>) -> Result<SolverConfig, CliError> {
    let mut cfg = SolverConfig::default();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        cfg = parse_config(&text, cfg)?;
    }
    if let Some(m) = mode {
        cfg.mode = m;
    }
    if let Some(v) = common.eps {
        cfg.eps = v;
    }
    if let Some(v) = common.max_iter {
        cfg.max_iter = v;
    }
    if let Some(v) = common.sigma0 {
        cfg.sigma0 = v;
    }
    if let Some(v) = common.gamma_formula {
        cfg.gamma_formula = v;
    }
    if let Some(v) = common.relax_a {
        cfg.relax_a = v;
    }
    if let Some(v) = &common.formats {
        apply_setting(&mut cfg, "formats", v)?;
    }
    cfg.rho_correction |= common.rho_correction;
    cfg.check_invariants |= common.check_invariants;
    validate_params(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn exit_code(s: Status) -> u8 {
    match s {
        Status::FirstOrder => 0,
        Status::PrecisionFailure => EXIT_PRECISION,
        Status::MaxIter => EXIT_MAX_ITER,
        Status::Stalled => EXIT_STALLED,
    }
}

fn cmd_solve(
    problem: &str,
    n: Option<usize>,
    mode: &str,
    trace: Option<&Path>,
    json: bool,
    common: &Common,
) -> Result<u8, CliError> {
    let mode: SolverMode = mode
        .parse()
        .map_err(|e: mpr2::solver::ConfigError| CliError::Config(e.to_string()))?;
    let mut cfg = build_config(common, Some(mode))?;
    cfg.record_trace = trace.is_some();
    cfg.record_iterates = trace.is_some();
    let p = get_problem(problem, n).map_err(|e| CliError::Config(e.to_string()))?;
    let report = solve(&p, &cfg).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(path) = trace {
        let f =
            fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        write_trace_jsonl(&report.trace, std::io::BufWriter::new(f))
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if json {
        let mut r = report.clone();
        r.trace.clear();
        println!(
            "{}",
            serde_json::to_string_pretty(&r).map_err(|e| CliError::Io(e.to_string()))?
        );
    } else {
        println!("problem     {} (n = {})", report.problem, report.n);
        println!("mode        {}", report.mode);
        println!("status      {}", report.status);
        if let Some(d) = &report.detail {
            println!("detail      {d}");
        }
        println!(
            "iterations  {} ({} successful)",
            report.iterations, report.successful
        );
        println!("f           {:e}", report.f);
        println!("|g|         {:e}", report.gnorm);
        let c = &report.counters;
        for (i, name) in c.formats.iter().enumerate() {
            println!(
                "{name:<10}  f {:>6} ({:>6} ok)   g {:>6} ({:>6} ok)",
                c.objective[i].total,
                c.objective[i].success,
                c.gradient[i].total,
                c.gradient[i].success
            );
        }
        if !report.violations.is_empty() {
            println!("violations  {}", report.violations.len());
            for v in &report.violations {
                println!("  {v}");
            }
        }
    }
    Ok(exit_code(report.status))
}

fn cmd_bench(
    suite: Option<&str>,
    modes: &str,
    out: &Path,
    common: &Common,
) -> Result<u8, CliError> {
    let base = build_config(common, None)?;
    let specs = modes
        .split(',')
        .map(|m| SolverSpec::parse(m.trim(), &base))
        .collect::<Result<Vec<_>, _>>()?;
    for s in &specs {
        validate_params(&s.cfg).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let problems = match suite {
        None => default_suite(),
        Some(list) => list
            .split(',')
            .map(|name| get_problem(name.trim(), None))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(e.to_string()))?,
    };
    let report = run_suite(&specs, &problems);
    let files = emit_report(
        &report,
        out,
        &[ReportFormat::Csv, ReportFormat::Json, ReportFormat::Text],
    )?;
    print!("{}", mpr2::harness::render_tables(&report));
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(0)
}

fn cmd_profile(input: &Path, out: &Path) -> Result<u8, CliError> {
    let runs = if input.is_dir() {
        input.join("runs.csv")
    } else {
        input.to_path_buf()
    };
    let costs = cost_matrix_from_runs_csv(&runs)?;
    let data = performance_profile(&costs);
    let f = fs::File::create(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    write_profile_csv(&data, f)?;
    eprintln!(
        "{} solvers, {} problems used, wrote {}",
        data.solvers.len(),
        data.problems_used,
        out.display()
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Solve {
            problem,
            n,
            mode,
            trace,
            json,
            common,
        } => cmd_solve(problem, *n, mode, trace.as_deref(), *json, common),
        Command::Bench {
            suite,
            modes,
            out,
            common,
        } => cmd_bench(suite.as_deref(), modes, out, common),
        Command::Profile { input, out } => cmd_profile(input, out),
        Command::List => {
            for e in registry() {
                println!("{:<22} n = {}", e.name, e.suite_n);
            }
            let _ = problem_names();
            Ok(0)
        }
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(CliError::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_IO)
        }
    }
}
