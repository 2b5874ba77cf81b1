//! Benchmark cells and their CSV records.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvar::sum_k_largest;
use crate::error::{CvqpError, Result};
use crate::generators::{
    equal_weight_kappa, gen_portfolio, gen_projection, PortfolioConfig, ProjectionConfig, QuantileConfig, QuantileData,
};
use crate::io::write_problem;
use crate::problem::{CvqpProblem, Quadratic};
use crate::projection::project_sum_k_largest_traced;
use crate::solver::{solve, SolverSettings};

pub const CSV_HEADER: [&str; 12] = [
    "family", "m", "n", "seed", "status", "iters", "total_s", "fact_s", "proj_s", "objective", "r_norm", "s_norm",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Projection,
    Portfolio,
    Quantile,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Projection => "projection",
            Family::Portfolio => "portfolio",
            Family::Quantile => "quantile",
        }
    }
}

/// One CSV row. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub family: Family,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub status: String,
    pub iters: usize,
    pub total_s: f64,
    pub fact_s: f64,
    pub proj_s: f64,
    pub objective: f64,
    pub r_norm: f64,
    pub s_norm: f64,
}

impl BenchmarkRecord {
    fn failed(family: Family, m: usize, n: usize, seed: u64, err: &CvqpError) -> Self {
        eprintln!("{} m={m} seed={seed}: {err}", family.as_str());
        BenchmarkRecord {
            family,
            m,
            n,
            seed,
            status: "InputError".into(),
            iters: 0,
            total_s: 0.0,
            fact_s: 0.0,
            proj_s: 0.0,
            objective: f64::NAN,
            r_norm: f64::NAN,
            s_norm: f64::NAN,
        }
    }
}

/// Everything needed to run a family over a grid of sizes and seeds.
#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub family: Family,
    pub ms: Vec<usize>,
    pub n: usize,
    pub seeds: u64,
    pub eta: f64,
    pub beta: f64,
    pub kappa: f64,
    /// Replaces `kappa` by the equal-weight portfolio's CVaR plus this margin.
    pub kappa_margin: Option<f64>,
    pub tau: f64,
    pub settings: SolverSettings,
    pub dump: Option<PathBuf>,
    /// Cells run concurrently; 1 keeps them sequential.
    pub parallel: usize,
}

impl BenchPlan {
    pub fn cells(&self) -> Vec<(usize, u64)> {
        self.ms.iter().flat_map(|&m| (0..self.seeds).map(move |s| (m, s))).collect()
    }

    /// Runs every cell; records come back in cell order whatever `parallel` is.
    pub fn run(&self) -> Result<Vec<BenchmarkRecord>> {
        if self.ms.is_empty() {
            return Err(CvqpError::InvalidSettings("empty m list".into()));
        }
        if let Some(dir) = &self.dump {
            std::fs::create_dir_all(dir)
                .map_err(|e| CvqpError::InvalidSettings(format!("cannot create {}: {e}", dir.display())))?;
        }
        let cells = self.cells();
        if self.parallel <= 1 {
            return Ok(cells.iter().map(|&(m, s)| self.run_cell(m, s)).collect());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.parallel)
            .build()
            .map_err(|e| CvqpError::InvalidSettings(e.to_string()))?;
        Ok(pool.install(|| cells.par_iter().map(|&(m, s)| self.run_cell(m, s)).collect()))
    }

    pub fn run_cell(&self, m: usize, seed: u64) -> BenchmarkRecord {
        let n = match self.family {
            Family::Projection => 0,
            _ => self.n,
        };
        let out = match self.family {
            Family::Projection => self.projection_cell(m, seed),
            Family::Portfolio => self.portfolio_problem(m, seed).and_then(|pb| self.solve_cell(&pb, m, seed)),
            Family::Quantile => self.quantile_problem(m, seed).and_then(|pb| self.solve_cell(&pb, m, seed)),
        };
        out.unwrap_or_else(|e| BenchmarkRecord::failed(self.family, m, n, seed, &e))
    }

    pub fn portfolio_problem(&self, m: usize, seed: u64) -> Result<CvqpProblem> {
        let cfg = PortfolioConfig {
            n_assets: self.n,
            m_scenarios: m,
            beta: self.beta,
            kappa: self.kappa,
            seed,
            ..PortfolioConfig::default()
        };
        let mut pb = gen_portfolio(&cfg)?;
        if let Some(margin) = self.kappa_margin {
            pb.kappa = equal_weight_kappa(&pb, margin)?;
        }
        Ok(pb)
    }

    pub fn quantile_problem(&self, m: usize, seed: u64) -> Result<CvqpProblem> {
        let cfg = QuantileConfig { n_features: self.n, m_samples: m, tau: self.tau, seed, ..QuantileConfig::default() };
        Ok(QuantileData::generate(&cfg)?.to_problem())
    }

    fn dump(&self, pb: &CvqpProblem, m: usize, seed: u64) -> Result<()> {
        if let Some(dir) = &self.dump {
            let path = dir.join(format!("{}_m{m}_n{}_seed{seed}.json", self.family.as_str(), pb.n()));
            write_problem(&path, pb)?;
        }
        Ok(())
    }

    fn solve_cell(&self, pb: &CvqpProblem, m: usize, seed: u64) -> Result<BenchmarkRecord> {
        self.dump(pb, m, seed)?;
        let res = solve(pb, &self.settings)?;
        Ok(BenchmarkRecord {
            family: self.family,
            m,
            n: pb.n(),
            seed,
            status: res.status.as_str().into(),
            iters: res.iterations,
            total_s: res.timings.total_seconds,
            fact_s: res.timings.factorization_seconds,
            proj_s: res.timings.projection_seconds,
            objective: res.objective,
            r_norm: res.residuals.r_norm,
            s_norm: res.residuals.s_norm,
        })
    }

    /// Times one projection. `iters` counts decrease steps, `objective` is
    /// `||z - v||^2 / 2` and `r_norm` is the bound violation of the output.
    fn projection_cell(&self, m: usize, seed: u64) -> Result<BenchmarkRecord> {
        let cfg = ProjectionConfig { m, beta: self.beta, eta: self.eta, seed };
        let (v, spec) = gen_projection(&cfg)?;
        if self.dump.is_some() {
            self.dump(&projection_as_problem(&v, self.beta, spec.d / spec.k as f64), m, seed)?;
        }
        let start = Instant::now();
        let traced = project_sum_k_largest_traced(&v, &spec)?;
        let secs = start.elapsed().as_secs_f64();
        let dist2: f64 = v.iter().zip(&traced.z).map(|(a, b)| (a - b) * (a - b)).sum();
        let violation = (sum_k_largest(&traced.z, spec.k)? - spec.d).max(0.0);
        Ok(BenchmarkRecord {
            family: Family::Projection,
            m,
            n: 0,
            seed,
            status: "Optimal".into(),
            iters: traced.steps,
            total_s: secs,
            fact_s: 0.0,
            proj_s: secs,
            objective: 0.5 * dist2,
            r_norm: violation,
            s_norm: 0.0,
        })
    }
}

/// The projection of `v` written as a CVQP in `z`: `P = I`, `q = -v`, `A = I`.
pub fn projection_as_problem(v: &[f64], beta: f64, kappa: f64) -> CvqpProblem {
    let m = v.len();
    CvqpProblem {
        p: Quadratic::Diagonal(DVector::from_element(m, 1.0)),
        q: -DVector::from_column_slice(v),
        a: DMatrix::identity(m, m),
        b: DMatrix::zeros(0, m),
        l: DVector::zeros(0),
        u: DVector::zeros(0),
        beta,
        kappa,
    }
}

/// Appends records, writing the header only when the file is new or empty.
pub fn append_csv(path: &Path, records: &[BenchmarkRecord]) -> Result<()> {
    let io_err = |e: std::io::Error| CvqpError::InvalidSettings(format!("cannot write {}: {e}", path.display()));
    let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
    let empty = file.metadata().map_err(io_err)?.len() == 0;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let csv_err = |e: csv::Error| CvqpError::InvalidSettings(e.to_string());
    if empty {
        w.write_record(CSV_HEADER).map_err(csv_err)?;
    }
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CvqpError::InvalidSettings(e.to_string()))?;
    file.write_all(&bytes).map_err(io_err)?;
    Ok(())
}

/// Per-m means of the timing columns and iteration counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeSummary {
    pub m: usize,
    pub runs: usize,
    pub optimal: usize,
    pub iters: f64,
    pub total_s: f64,
    pub fact_s: f64,
    pub proj_s: f64,
}

pub fn summarize(records: &[BenchmarkRecord]) -> Vec<SizeSummary> {
    let mut sizes: Vec<usize> = Vec::new();
    for r in records {
        if !sizes.contains(&r.m) {
            sizes.push(r.m);
        }
    }
    sizes
        .into_iter()
        .map(|m| {
            let rows: Vec<&BenchmarkRecord> = records.iter().filter(|r| r.m == m).collect();
            let k = rows.len() as f64;
            let mean = |f: fn(&BenchmarkRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / k;
            SizeSummary {
                m,
                runs: rows.len(),
                optimal: rows.iter().filter(|r| r.status == "Optimal").count(),
                iters: mean(|r| r.iters as f64),
                total_s: mean(|r| r.total_s),
                fact_s: mean(|r| r.fact_s),
                proj_s: mean(|r| r.proj_s),
            }
        })
        .collect()
}
