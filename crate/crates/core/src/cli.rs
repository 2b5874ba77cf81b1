//! `cvqp solve` and `cvqp bench`.
//!
//! Exit codes: 0 solved (or benchmark written with every cell Optimal),
//! 2 iteration or time limit (or some cell not Optimal), 1 bad input or
//! usage. Results go to stdout, diagnostics to stderr.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{append_csv, summarize, BenchPlan, Family};
use crate::io::read_problem;
use crate::solver::{solve, SolverSettings, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_LIMIT: i32 = 2;

/// Caps every thread pool the binary creates.
pub const THREADS_ENV: &str = "CVQP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "cvqp", version, about = "Solve and benchmark CVaR-constrained quadratic programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem stored as JSON and print the result as JSON.
    Solve(SolveArgs),
    /// Generate and solve a benchmark family, appending rows to a CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SolverFlags {
    #[arg(long)]
    pub eps_abs: Option<f64>,
    #[arg(long)]
    pub eps_rel: Option<f64>,
    #[arg(long)]
    pub rho0: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub no_adaptive_rho: bool,
}

impl SolverFlags {
    pub fn settings(&self) -> SolverSettings {
        let d = SolverSettings::default();
        SolverSettings {
            eps_abs: self.eps_abs.unwrap_or(d.eps_abs),
            eps_rel: self.eps_rel.unwrap_or(d.eps_rel),
            rho0: self.rho0.unwrap_or(d.rho0),
            alpha: self.alpha.unwrap_or(d.alpha),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            time_limit: self.time_limit,
            adaptive_rho: !self.no_adaptive_rho,
            ..d
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub file: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Projection,
    Portfolio,
    Quantile,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Projection => Family::Projection,
            FamilyArg::Portfolio => Family::Portfolio,
            FamilyArg::Quantile => Family::Quantile,
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub family: FamilyArg,
    /// Comma-separated sizes; scientific notation such as 1e4 is accepted.
    #[arg(long = "m", required = true, value_delimiter = ',', value_parser = parse_size)]
    pub m: Vec<usize>,
    /// Assets (portfolio) or features (quantile).
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Seeds 0..k are run for every size.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.95)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.3)]
    pub kappa: f64,
    /// Set kappa to the equal-weight portfolio's CVaR plus this margin.
    #[arg(long)]
    pub kappa_margin: Option<f64>,
    #[arg(long, default_value_t = 0.9)]
    pub tau: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Write every generated problem as JSON into this directory.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Number of cells run at once.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    #[command(flatten)]
    pub solver: SolverFlags,
}

fn parse_size(s: &str) -> Result<usize, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty size".into());
    }
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if !(v >= 1.0) || v.fract() != 0.0 || v > 1e15 {
        return Err(format!("size must be a positive integer, got {s:?}"));
    }
    Ok(v as usize)
}

/// Value of `CVQP_THREADS` when set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    if let Some(n) = thread_cap() {
        // Fails only if the global pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Bench(args) => cmd_bench(&args),
    }
}

pub fn cmd_solve(args: &SolveArgs) -> i32 {
    let problem = match read_problem(&args.file) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {}: {e}", args.file.display());
            return EXIT_INPUT;
        }
    };
    let result = match solve(&problem, &args.solver.settings()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    match serde_json::to_string_pretty(&result) {
        Ok(text) => println!("{text}"),
        Err(e) => {
            eprintln!("error: cannot encode result: {e}");
            return EXIT_INPUT;
        }
    }
    match result.status {
        Status::Optimal => EXIT_OK,
        Status::MaxIterations | Status::TimeLimit => {
            eprintln!(
                "not converged: {} after {} iterations (r = {:.3e}, s = {:.3e})",
                result.status, result.iterations, result.residuals.r_norm, result.residuals.s_norm
            );
            EXIT_LIMIT
        }
        Status::InfeasibleInput => {
            eprintln!("error: {}", result.message.as_deref().unwrap_or("infeasible input"));
            EXIT_INPUT
        }
    }
}

pub fn cmd_bench(args: &BenchArgs) -> i32 {
    if args.m.is_empty() {
        eprintln!("error: --m needs at least one size");
        return EXIT_INPUT;
    }
    let settings = args.solver.settings();
    if let Err(e) = settings.validate() {
        eprintln!("error: {e}");
        return EXIT_INPUT;
    }
    let parallel = match thread_cap() {
        Some(cap) => args.parallel.clamp(1, cap),
        None => args.parallel.max(1),
    };
    let plan = BenchPlan {
        family: args.family.into(),
        ms: args.m.clone(),
        n: args.n,
        seeds: args.seeds,
        eta: args.eta,
        beta: args.beta,
        kappa: args.kappa,
        kappa_margin: args.kappa_margin,
        tau: args.tau,
        settings,
        dump: args.dump.clone(),
        parallel,
    };
    let records = match plan.run() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    if let Err(e) = append_csv(&args.out, &records) {
        eprintln!("error: {e}");
        return EXIT_INPUT;
    }
    println!("{:>10} {:>5} {:>7} {:>10} {:>12} {:>12} {:>12}", "m", "runs", "optimal", "iters", "total_s", "fact_s", "proj_s");
    for s in summarize(&records) {
        println!(
            "{:>10} {:>5} {:>7} {:>10.1} {:>12.6} {:>12.6} {:>12.6}",
            s.m, s.runs, s.optimal, s.iters, s.total_s, s.fact_s, s.proj_s
        );
    }
    if records.iter().all(|r| r.status == "Optimal") {
        EXIT_OK
    } else {
        EXIT_LIMIT
    }
}
