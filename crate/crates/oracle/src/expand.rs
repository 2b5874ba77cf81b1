//! The CVaR constraint as linear inequalities.
//!
//! Over `(x, y, alpha)` with `y` in `R^m`: `(Ax)_i - alpha - y_i <= 0`,
//! `-y_i <= 0` and `alpha + (1/k) sum y <= kappa`, plus the rows of
//! `l <= Bx <= u` (equalities where `l_i = u_i`, infinite sides dropped).
//! The `1/k` weight matches the sample CVaR `f_k / k` exactly; the last row
//! is dropped when `kappa = +inf`.

use cvqp::problem::CvqpProblem;
use nalgebra::DVector;

use crate::qp::{LinearRow, SparseQp};
use crate::OracleError;

#[derive(Debug, Clone)]
pub struct ExpandedQp {
    pub n_x: usize,
    pub m: usize,
    pub k: usize,
    pub qp: SparseQp,
    /// Rows contributed by the CVaR representation, first in `qp.ineq`.
    pub cvar_rows: usize,
}

#[derive(Debug, Clone)]
pub struct ExpandedSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub alpha: f64,
    pub objective: f64,
}

impl ExpandedQp {
    pub fn n_vars(&self) -> usize {
        self.n_x + self.m + 1
    }

    pub fn y_index(&self, i: usize) -> usize {
        self.n_x + i
    }

    pub fn alpha_index(&self) -> usize {
        self.n_x + self.m
    }

    pub fn solve(&self) -> Result<ExpandedSolution, OracleError> {
        let s = self.qp.solve()?;
        Ok(ExpandedSolution {
            x: DVector::from_column_slice(&s.v[..self.n_x]),
            y: DVector::from_column_slice(&s.v[self.n_x..self.n_x + self.m]),
            alpha: s.v[self.alpha_index()],
            objective: s.objective,
        })
    }
}

pub fn expand_cvqp(problem: &CvqpProblem) -> Result<ExpandedQp, OracleError> {
    let spec = problem.validate().map_err(|e| OracleError::Setup(e.to_string()))?;
    let (n, m, k) = (problem.n(), problem.m(), spec.k);
    let alpha = n + m;

    let p = problem.p.to_dense();
    let mut h_upper = Vec::new();
    for j in 0..n {
        for i in 0..=j {
            if p[(i, j)] != 0.0 {
                h_upper.push((i, j, p[(i, j)]));
            }
        }
    }
    let mut g = vec![0.0; n + m + 1];
    g[..n].copy_from_slice(problem.q.as_slice());

    let mut ineq = Vec::with_capacity(2 * m + 1);
    for i in 0..m {
        let mut coeffs: Vec<(usize, f64)> =
            (0..n).filter(|&j| problem.a[(i, j)] != 0.0).map(|j| (j, problem.a[(i, j)])).collect();
        coeffs.push((alpha, -1.0));
        coeffs.push((n + i, -1.0));
        ineq.push(LinearRow::new(coeffs, 0.0));
    }
    for i in 0..m {
        ineq.push(LinearRow::new(vec![(n + i, -1.0)], 0.0));
    }
    if problem.kappa < f64::INFINITY {
        let mut coeffs = vec![(alpha, 1.0)];
        coeffs.extend((0..m).map(|i| (n + i, 1.0 / k as f64)));
        ineq.push(LinearRow::new(coeffs, problem.kappa));
    }
    let cvar_rows = ineq.len();

    let mut eq = Vec::new();
    for r in 0..problem.p_rows() {
        let row: Vec<(usize, f64)> =
            (0..n).filter(|&j| problem.b[(r, j)] != 0.0).map(|j| (j, problem.b[(r, j)])).collect();
        let (lo, hi) = (problem.l[r], problem.u[r]);
        if lo == hi {
            eq.push(LinearRow::new(row, lo));
            continue;
        }
        if hi < f64::INFINITY {
            ineq.push(LinearRow::new(row.clone(), hi));
        }
        if lo > f64::NEG_INFINITY {
            ineq.push(LinearRow::new(row.iter().map(|&(j, c)| (j, -c)).collect(), -lo));
        }
    }

    Ok(ExpandedQp { n_x: n, m, k, qp: SparseQp { n: n + m + 1, h_upper, g, eq, ineq }, cvar_rows })
}

/// Solves the expanded form and returns its optimal `x` and objective.
pub fn solve_cvqp(problem: &CvqpProblem) -> Result<ExpandedSolution, OracleError> {
    expand_cvqp(problem)?.solve()
}
