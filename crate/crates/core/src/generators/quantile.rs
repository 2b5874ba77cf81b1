//! Quantile regression as a CVQP.
//!
//! With residuals `r = y - Ux`, the pinball objective minimized over the
//! intercept equals `(1 - tau) (x'ū - ȳ + cvar_tau(r))`. Dropping the
//! constant and the positive factor, an epigraph variable `t` and a pinned
//! variable `s = 1` give the CVQP over `(x, t, s)` with `P = 0`,
//! `q = (ū, 1, 0)`, `A = [-U | -1 | y]`, `B = e'_{n+2}`, `l = u = 1`,
//! `kappa = 0` and `beta = tau`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::rng::Stream;
use crate::cvar::tail_count;
use crate::error::{CvqpError, Result};
use crate::problem::{CvqpProblem, Quadratic};
use crate::solver::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileConfig {
    pub n_features: usize,
    pub m_samples: usize,
    pub tau: f64,
    pub noise_scale: f64,
    pub t_dof: usize,
    pub seed: u64,
}

impl Default for QuantileConfig {
    fn default() -> Self {
        QuantileConfig { n_features: 5, m_samples: 2000, tau: 0.9, noise_scale: 0.1, t_dof: 5, seed: 0 }
    }
}

impl QuantileConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CvqpError::InvalidData(msg));
        if self.n_features == 0 || self.m_samples == 0 {
            return bad("need at least one feature and one sample".into());
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if self.t_dof == 0 || !(self.noise_scale >= 0.0) {
            return bad("noise needs dof >= 1 and a nonnegative scale".into());
        }
        tail_count(self.tau, self.m_samples).map(|_| ())
    }
}

/// Sampled regression data.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileData {
    /// Features, `m x n`.
    pub u: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Coefficients the responses were generated from.
    pub coef: DVector<f64>,
    pub tau: f64,
}

impl QuantileData {
    /// Draws `coef_j ~ N(0, 1/(1+j))` for `j = 1..n` first, then for each
    /// sample its `n` features followed by its noise term.
    pub fn generate(cfg: &QuantileConfig) -> Result<Self> {
        cfg.validate()?;
        let (m, n) = (cfg.m_samples, cfg.n_features);
        let mut rng = Stream::new(cfg.seed);
        let coef = DVector::from_iterator(n, (1..=n).map(|j| rng.normal() / ((1 + j) as f64).sqrt()));
        let mut u = DMatrix::zeros(m, n);
        let mut y = DVector::zeros(m);
        for i in 0..m {
            let mut fit = 0.0;
            for j in 0..n {
                let v = rng.normal();
                u[(i, j)] = v;
                fit += v * coef[j];
            }
            y[i] = fit + cfg.noise_scale * rng.student_t(cfg.t_dof);
        }
        Ok(QuantileData { u, y, coef, tau: cfg.tau })
    }

    pub fn n(&self) -> usize {
        self.u.ncols()
    }

    pub fn m(&self) -> usize {
        self.u.nrows()
    }

    pub fn to_problem(&self) -> CvqpProblem {
        let (m, n) = self.u.shape();
        let mut q = DVector::zeros(n + 2);
        for (j, col) in self.u.column_iter().enumerate() {
            q[j] = col.sum() / m as f64;
        }
        q[n] = 1.0;
        let mut a = DMatrix::zeros(m, n + 2);
        a.columns_mut(0, n).copy_from(&-&self.u);
        a.column_mut(n).fill(-1.0);
        a.column_mut(n + 1).copy_from(&self.y);
        let mut b = DMatrix::zeros(1, n + 2);
        b[(0, n + 1)] = 1.0;
        CvqpProblem {
            p: Quadratic::zeros(n + 2),
            q,
            a,
            b,
            l: DVector::from_element(1, 1.0),
            u: DVector::from_element(1, 1.0),
            beta: self.tau,
            kappa: 0.0,
        }
    }

    /// `y - Ux`.
    pub fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.y - linalg::mul(&self.u, x)
    }

    /// An optimal intercept for slope `x`: the `k`-th largest residual.
    pub fn recover_intercept(&self, x: &DVector<f64>) -> Result<f64> {
        let k = tail_count(self.tau, self.m())?;
        let mut r = self.residuals(x).as_slice().to_vec();
        r.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
        Ok(r[k - 1])
    }

    /// `(1/m) sum_i rho_tau(y_i - u_i'x - x0)`.
    pub fn pinball_loss(&self, x: &DVector<f64>, x0: f64) -> f64 {
        let r = self.residuals(x);
        let tau = self.tau;
        r.iter().map(|&ri| pinball(ri - x0, tau)).sum::<f64>() / self.m() as f64
    }

    /// Pinball loss of a CVQP iterate `(x, t, s)` with its recovered intercept.
    pub fn loss_of_solution(&self, x_tilde: &[f64]) -> Result<f64> {
        let n = self.n();
        if x_tilde.len() != n + 2 {
            return Err(CvqpError::DimensionMismatch(format!(
                "expected {} entries, got {}",
                n + 2,
                x_tilde.len()
            )));
        }
        let x = DVector::from_column_slice(&x_tilde[..n]);
        let x0 = self.recover_intercept(&x)?;
        Ok(self.pinball_loss(&x, x0))
    }
}

pub fn pinball(z: f64, tau: f64) -> f64 {
    if z >= 0.0 {
        tau * z
    } else {
        (tau - 1.0) * z
    }
}

pub fn gen_quantile(cfg: &QuantileConfig) -> Result<CvqpProblem> {
    Ok(QuantileData::generate(cfg)?.to_problem())
}
