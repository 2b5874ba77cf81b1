//! Thin wrapper over Clarabel for sparse QPs with equality and `<=` rows.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use crate::OracleError;

/// `coeffs . v (<= or =) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        LinearRow { coeffs, rhs }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, c)| c * v[j]).sum()
    }
}

/// `minimize (1/2) v'Hv + g'v` subject to `eq` and `ineq` rows.
#[derive(Debug, Clone, Default)]
pub struct SparseQp {
    pub n: usize,
    /// Upper-triangle entries of `H`; duplicates are summed.
    pub h_upper: Vec<(usize, usize, f64)>,
    pub g: Vec<f64>,
    pub eq: Vec<LinearRow>,
    pub ineq: Vec<LinearRow>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub v: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
}

/// Interior-point tolerance used for every oracle solve.
pub const ORACLE_TOL: f64 = 1e-13;

/// Looser tolerances tried in order when a solve stalls short of `ORACLE_TOL`.
pub const ORACLE_FALLBACK_TOLS: [f64; 2] = [1e-11, 1e-9];

/// Clarabel settings with every stopping tolerance set to `tol`.
pub fn oracle_settings(tol: f64) -> DefaultSettings<f64> {
    DefaultSettings {
        verbose: false,
        tol_gap_abs: tol,
        tol_gap_rel: tol,
        tol_feas: tol,
        tol_ktratio: 1e-8,
        max_iter: 400,
        // Degenerate projections stall near the optimum without tight refinement.
        iterative_refinement_reltol: 1e-16,
        iterative_refinement_abstol: 1e-16,
        iterative_refinement_max_iter: 50,
        ..DefaultSettings::default()
    }
}

impl SparseQp {
    pub fn objective(&self, v: &[f64]) -> f64 {
        let quad: f64 = self
            .h_upper
            .iter()
            .map(|&(i, j, h)| if i == j { 0.5 * h * v[i] * v[i] } else { h * v[i] * v[j] })
            .sum();
        quad + self.g.iter().zip(v).map(|(g, x)| g * x).sum::<f64>()
    }

    pub fn solve(&self) -> Result<QpSolution, OracleError> {
        let mut last = None;
        for settings in std::iter::once(ORACLE_TOL).chain(ORACLE_FALLBACK_TOLS).map(oracle_settings) {
            match self.solve_with(settings) {
                Err(OracleError::NotSolved(msg)) => last = Some(OracleError::NotSolved(msg)),
                done => return done,
            }
        }
        Err(last.expect("at least one attempt"))
    }

    pub fn solve_with(&self, settings: DefaultSettings<f64>) -> Result<QpSolution, OracleError> {
        let n = self.n;
        let (mut hi, mut hj, mut hv) = (Vec::new(), Vec::new(), Vec::new());
        for &(i, j, h) in &self.h_upper {
            let (r, c) = if i <= j { (i, j) } else { (j, i) };
            hi.push(r);
            hj.push(c);
            hv.push(h);
        }
        let p = CscMatrix::new_from_triplets(n, n, hi, hj, hv);

        let rows = self.eq.len() + self.ineq.len();
        let (mut ai, mut aj, mut av) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::with_capacity(rows);
        for (r, row) in self.eq.iter().chain(&self.ineq).enumerate() {
            for &(j, c) in &row.coeffs {
                ai.push(r);
                aj.push(j);
                av.push(c);
            }
            b.push(row.rhs);
        }
        let a = CscMatrix::new_from_triplets(rows, n, ai, aj, av);
        let mut cones = Vec::new();
        if !self.eq.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(self.eq.len()));
        }
        if !self.ineq.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(self.ineq.len()));
        }
        let mut solver = DefaultSolver::new(&p, &self.g, &a, &b, &cones, settings)
            .map_err(|e| OracleError::Setup(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(QpSolution {
                v: sol.x.clone(),
                objective: self.objective(&sol.x),
                iterations: sol.iterations,
            }),
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Err(OracleError::Infeasible),
            other => Err(OracleError::NotSolved(format!("{other:?}"))),
        }
    }
}
