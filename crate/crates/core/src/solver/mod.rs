//! Over-relaxed ADMM for CVaR-constrained QPs.
//!
//! The CVaR constraint and the side constraints are split off through
//! `Ax = z` and `Bx = z̃`. Each sweep is one backsolve with the cached
//! factor of `M = P + rho (A'A + B'B)`, a sum-of-k-largest projection, a
//! clip, and the scaled dual updates. The penalty is rebalanced every
//! `rho_update_interval` sweeps, refactorizing `M` when it changes.
//! A solve is optimal once both residuals are within tolerance and `x`
//! breaks no constraint by more than `feasibility_tol`.

pub mod linalg;
mod settings;
mod workspace;

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use linalg::{factorize, KktFactor};
pub use settings::SolverSettings;
pub use workspace::{clip, Residuals, Workspace};

use crate::error::{CvqpError, Result};
use crate::problem::CvqpProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    MaxIterations,
    TimeLimit,
    InfeasibleInput,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "Optimal",
            Status::MaxIterations => "MaxIterations",
            Status::TimeLimit => "TimeLimit",
            Status::InfeasibleInput => "InfeasibleInput",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub r_norm: f64,
    pub s_norm: f64,
    pub eps_pri: f64,
    pub eps_dual: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub factorization_seconds: f64,
    pub projection_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub x: Vec<f64>,
    pub status: Status,
    pub objective: f64,
    pub iterations: usize,
    /// Residuals after the last sweep (all zero if no sweep ran).
    pub residuals: Residuals,
    pub rho: f64,
    /// Every `history_interval`-th sweep plus the last one.
    pub history: Vec<IterationRecord>,
    pub timings: Timings,
    /// Explanation attached to `InfeasibleInput`.
    pub message: Option<String>,
}

impl SolverResult {
    pub fn x_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x)
    }
}

/// Runs ADMM until both residuals meet their tolerances or a limit is hit.
///
/// Validation and settings errors are returned as `Err`. A singular `M`
/// (P, A and B share a nullspace) yields status `InfeasibleInput`.
pub fn solve(problem: &CvqpProblem, settings: &SolverSettings) -> Result<SolverResult> {
    let spec = problem.validate()?;
    settings.validate()?;
    let start = Instant::now();

    let mut ws = match Workspace::new(problem, spec, settings) {
        Ok(ws) => ws,
        Err(CvqpError::NotPositiveDefinite) => {
            return Ok(SolverResult {
                x: vec![0.0; problem.n()],
                status: Status::InfeasibleInput,
                objective: f64::NAN,
                iterations: 0,
                residuals: Residuals { r_norm: f64::NAN, s_norm: f64::NAN, eps_pri: 0.0, eps_dual: 0.0 },
                rho: settings.rho0,
                history: Vec::new(),
                timings: Timings { total_seconds: start.elapsed().as_secs_f64(), ..Timings::default() },
                message: Some(CvqpError::NotPositiveDefinite.to_string()),
            });
        }
        Err(e) => return Err(e),
    };

    let mut history = Vec::new();
    let mut status = Status::MaxIterations;
    let mut last = Residuals { r_norm: 0.0, s_norm: 0.0, eps_pri: 0.0, eps_dual: 0.0 };
    let mut iterations = 0;
    for it in 1..=settings.max_iter {
        let rho = ws.rho();
        last = ws.iterate(problem, settings)?;
        iterations = it;
        // Small residuals alone allow the returned x to miss a constraint
        // by about sqrt(rows) eps_abs, so x itself must also be feasible.
        let converged = last.converged() && ws.violation(problem)? <= settings.feasibility_tol();
        let out_of_time = settings
            .time_limit
            .is_some_and(|limit| start.elapsed().as_secs_f64() >= limit);
        let finishing = converged || out_of_time || it == settings.max_iter;
        if it % settings.history_interval == 0 || finishing {
            history.push(IterationRecord {
                iteration: it,
                r_norm: last.r_norm,
                s_norm: last.s_norm,
                eps_pri: last.eps_pri,
                eps_dual: last.eps_dual,
                rho,
            });
        }
        if converged {
            status = Status::Optimal;
            break;
        }
        if out_of_time {
            status = Status::TimeLimit;
            break;
        }
        if settings.adaptive_rho && it % settings.rho_update_interval == 0 {
            ws.update_rho(problem, &last, settings)?;
        }
    }

    let objective = problem.objective(&ws.x);
    Ok(SolverResult {
        x: ws.x.as_slice().to_vec(),
        status,
        objective,
        iterations,
        residuals: last,
        rho: ws.rho(),
        history,
        timings: Timings {
            factorization_seconds: ws.factorization_seconds,
            projection_seconds: ws.projection_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
        message: None,
    })
}
