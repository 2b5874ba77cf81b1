//! Problem data for CVaR-constrained quadratic programs.
//!
//! ```text
//! minimize    (1/2) x'Px + q'x
//! subject to  cvar_beta(Ax) <= kappa
//!             l <= Bx <= u
//! ```

use nalgebra::{DMatrix, DVector};

use crate::cvar::tail_count;
use crate::error::{CvqpError, Result};

/// Absolute tolerance on `|P - P'|` entries.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Objective quadratic, either dense or diagonal.
#[derive(Debug, Clone, PartialEq)]
pub enum Quadratic {
    Dense(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

impl Quadratic {
    pub fn zeros(n: usize) -> Self {
        Quadratic::Diagonal(DVector::zeros(n))
    }

    /// Number of rows of the (square) matrix.
    pub fn dim(&self) -> usize {
        match self {
            Quadratic::Dense(p) => p.nrows(),
            Quadratic::Diagonal(d) => d.len(),
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Quadratic::Dense(p) => p * x,
            Quadratic::Diagonal(d) => d.component_mul(x),
        }
    }

    /// `x' P x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        match self {
            Quadratic::Dense(p) => x.dot(&(p * x)),
            Quadratic::Diagonal(d) => d.iter().zip(x.iter()).map(|(di, xi)| di * xi * xi).sum(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Quadratic::Dense(p) => p.clone(),
            Quadratic::Diagonal(d) => DMatrix::from_diagonal(d),
        }
    }

    /// Adds `P` into `target` in place.
    pub fn add_to(&self, target: &mut DMatrix<f64>) {
        match self {
            Quadratic::Dense(p) => *target += p,
            Quadratic::Diagonal(d) => {
                for (i, di) in d.iter().enumerate() {
                    target[(i, i)] += di;
                }
            }
        }
    }
}

/// Tail size and right-hand side of the equivalent `f_k(z) <= d` constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvarSpec {
    pub k: usize,
    pub d: f64,
}

impl CvarSpec {
    pub fn new(k: usize, d: f64) -> Self {
        CvarSpec { k, d }
    }

    /// `k = ceil((1 - beta) m)` and `d = kappa k`.
    pub fn for_level(beta: f64, kappa: f64, m: usize) -> Result<Self> {
        let k = tail_count(beta, m)?;
        Ok(CvarSpec { k, d: kappa * k as f64 })
    }

    pub fn check(&self, m: usize) -> Result<()> {
        if self.k == 0 || self.k > m {
            return Err(CvqpError::KOutOfRange { k: self.k, m });
        }
        if self.d.is_nan() {
            return Err(CvqpError::InvalidData("CVaR bound d is NaN".into()));
        }
        Ok(())
    }
}

/// Full data of a CVaR-constrained QP.
#[derive(Debug, Clone, PartialEq)]
pub struct CvqpProblem {
    pub p: Quadratic,
    pub q: DVector<f64>,
    /// Scenario loss map, `m x n`.
    pub a: DMatrix<f64>,
    /// Side constraints, `p x n`.
    pub b: DMatrix<f64>,
    pub l: DVector<f64>,
    pub u: DVector<f64>,
    pub beta: f64,
    pub kappa: f64,
}

impl CvqpProblem {
    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// Number of side-constraint rows.
    pub fn p_rows(&self) -> usize {
        self.b.nrows()
    }

    /// Checks every invariant and returns the equivalent sum-of-k-largest bound.
    pub fn validate(&self) -> Result<CvarSpec> {
        let n = self.n();
        if self.p.dim() != n {
            return Err(CvqpError::DimensionMismatch(format!(
                "P is {0}x{0} but q has {1} entries",
                self.p.dim(),
                n
            )));
        }
        if let Quadratic::Dense(p) = &self.p {
            if p.ncols() != p.nrows() {
                return Err(CvqpError::DimensionMismatch(format!(
                    "P is {}x{}, not square",
                    p.nrows(),
                    p.ncols()
                )));
            }
        }
        if self.a.ncols() != n {
            return Err(CvqpError::DimensionMismatch(format!(
                "A has {} columns, expected {}",
                self.a.ncols(),
                n
            )));
        }
        if self.m() == 0 {
            return Err(CvqpError::DimensionMismatch("A has no rows".into()));
        }
        if self.b.ncols() != n {
            return Err(CvqpError::DimensionMismatch(format!(
                "B has {} columns, expected {}",
                self.b.ncols(),
                n
            )));
        }
        let p = self.p_rows();
        if self.l.len() != p || self.u.len() != p {
            return Err(CvqpError::DimensionMismatch(format!(
                "B has {} rows but l has {} and u has {} entries",
                p,
                self.l.len(),
                self.u.len()
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(CvqpError::BadBeta(self.beta));
        }
        if let Quadratic::Dense(pm) = &self.p {
            for i in 0..n {
                for j in (i + 1)..n {
                    let gap = (pm[(i, j)] - pm[(j, i)]).abs();
                    if !(gap <= SYMMETRY_TOL) {
                        return Err(CvqpError::AsymmetricP { row: i, col: j, gap });
                    }
                }
            }
        }
        for i in 0..p {
            let (lo, hi) = (self.l[i], self.u[i]);
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(CvqpError::InvalidData(format!("bad bound pair at row {i}: [{lo}, {hi}]")));
            }
            if lo > hi {
                return Err(CvqpError::BadBounds { index: i, lower: lo, upper: hi });
            }
        }
        let finite = |name: &str, values: &[f64]| -> Result<()> {
            if values.iter().any(|v| !v.is_finite()) {
                Err(CvqpError::InvalidData(format!("{name} contains a non-finite entry")))
            } else {
                Ok(())
            }
        };
        match &self.p {
            Quadratic::Dense(pm) => finite("P", pm.as_slice())?,
            Quadratic::Diagonal(d) => finite("P", d.as_slice())?,
        }
        finite("q", self.q.as_slice())?;
        finite("A", self.a.as_slice())?;
        finite("B", self.b.as_slice())?;
        if self.kappa.is_nan() || self.kappa == f64::NEG_INFINITY {
            return Err(CvqpError::InvalidData(format!("kappa = {} is not allowed", self.kappa)));
        }
        CvarSpec::for_level(self.beta, self.kappa, self.m())
    }

    /// `(1/2) x'Px + q'x`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.p.quad_form(x) + self.q.dot(x)
    }
}

/// Epigraph form of `minimize (1/2) x'Px + q'x + cvar_beta(Ax)` s.t. `l <= Bx <= u`.
///
/// The returned problem has decision `(x, t)`: by translation equivariance
/// `cvar(Ax) <= t` iff `cvar(Ax - t 1) <= 0`, so the lifted loss map is
/// `[A | -1]` with `kappa = 0` and objective `(1/2) x'Px + q'x + t`.
pub fn lift_cvar_objective(
    p: &Quadratic,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
    beta: f64,
) -> Result<CvqpProblem> {
    let n = q.len();
    if p.dim() != n || a.ncols() != n || b.ncols() != n || l.len() != b.nrows() || u.len() != b.nrows() {
        return Err(CvqpError::DimensionMismatch(format!(
            "lift_cvar_objective: P {0}x{0}, q {1}, A {2}x{3}, B {4}x{5}, l {6}, u {7}",
            p.dim(),
            n,
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            l.len(),
            u.len()
        )));
    }
    let lifted_p = match p {
        Quadratic::Diagonal(d) => Quadratic::Diagonal(d.clone().insert_row(n, 0.0)),
        Quadratic::Dense(pm) => {
            let mut out = DMatrix::zeros(n + 1, n + 1);
            out.view_mut((0, 0), (n, n)).copy_from(pm);
            Quadratic::Dense(out)
        }
    };
    let lifted_q = q.clone().insert_row(n, 1.0);
    let lifted_a = a.clone().insert_column(n, -1.0);
    let lifted_b = b.clone().insert_column(n, 0.0);
    Ok(CvqpProblem {
        p: lifted_p,
        q: lifted_q,
        a: lifted_a,
        b: lifted_b,
        l: l.clone(),
        u: u.clone(),
        beta,
        kappa: 0.0,
    })
}
