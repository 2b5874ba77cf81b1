//! Reference solutions for testing `cvqp`.
//!
//! Every CVaR constraint is rewritten as linear inequalities and handed to
//! the Clarabel interior-point solver; projections are additionally checked
//! against their optimality conditions. Nothing here is fast.

mod direct;
mod expand;
mod kkt;
mod qp;

pub use direct::{project_cvar_via_qp, project_via_qp, quantile_regression_lp, solve_cvar_objective};
pub use expand::{expand_cvqp, solve_cvqp, ExpandedQp, ExpandedSolution};
pub use kkt::{check_projection_kkt, check_projection_kkt_with_tol, default_tol, KktReport};
pub use qp::{oracle_settings, LinearRow, QpSolution, SparseQp, ORACLE_FALLBACK_TOLS, ORACLE_TOL};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("cannot set up the reference problem: {0}")]
    Setup(String),
    #[error("reference problem is infeasible")]
    Infeasible,
    #[error("reference solver stopped with status {0}")]
    NotSolved(String),
}
