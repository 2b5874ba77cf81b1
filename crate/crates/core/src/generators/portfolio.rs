use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::rng::Stream;
use crate::cvar::cvar;
use crate::error::{CvqpError, Result};
use crate::problem::{CvqpProblem, Quadratic};
use crate::solver::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioConfig {
    pub n_assets: usize,
    pub m_scenarios: usize,
    /// Probability of the calm regime.
    pub omega: f64,
    /// Mean return per asset; `+nu` when calm, `-nu` under stress.
    pub nu: f64,
    /// Volatility multiplier under stress.
    pub sigma: f64,
    /// Risk aversion.
    pub gamma: f64,
    pub beta: f64,
    pub kappa: f64,
    pub seed: u64,
}

impl Default for PortfolioConfig {
    fn default() -> Self {
        PortfolioConfig {
            n_assets: 10,
            m_scenarios: 1000,
            omega: 0.8,
            nu: 0.2,
            sigma: 2.0,
            gamma: 1.0,
            beta: 0.95,
            kappa: 0.3,
            seed: 0,
        }
    }
}

impl PortfolioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CvqpError::InvalidData(msg));
        if self.n_assets == 0 || self.m_scenarios == 0 {
            return bad("need at least one asset and one scenario".into());
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return bad(format!("omega must lie in [0, 1], got {}", self.omega));
        }
        if !(self.sigma > 0.0) || !(self.gamma > 0.0) {
            return bad(format!("sigma and gamma must be positive, got {} and {}", self.sigma, self.gamma));
        }
        if !self.nu.is_finite() {
            return bad(format!("nu must be finite, got {}", self.nu));
        }
        crate::cvar::tail_count(self.beta, self.m_scenarios).map(|_| ())
    }
}

/// Scenario returns `R`, `m x n`.
///
/// Each scenario draws one uniform for its regime (calm when below
/// `omega`), then `n` normals in asset order.
pub fn sample_returns(cfg: &PortfolioConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let (m, n) = (cfg.m_scenarios, cfg.n_assets);
    let mut rng = Stream::new(cfg.seed);
    let mut r = DMatrix::zeros(m, n);
    for i in 0..m {
        let (shift, scale) = if rng.uniform() < cfg.omega { (cfg.nu, 1.0) } else { (-cfg.nu, cfg.sigma) };
        for j in 0..n {
            r[(i, j)] = shift + scale * rng.normal();
        }
    }
    Ok(r)
}

/// Mean-variance portfolio with a CVaR limit on the loss `-Rx`.
///
/// `P = gamma Sigma`, `q = -mu`, `A = -R`, `B = [1'; I]`, `l = (1, 0)`,
/// `u = (1, inf)`; `Sigma` uses the biased `1/m` normalization.
pub fn gen_portfolio(cfg: &PortfolioConfig) -> Result<CvqpProblem> {
    let r = sample_returns(cfg)?;
    let (m, n) = r.shape();
    let mu = DVector::from_iterator(n, r.column_iter().map(|c| c.sum() / m as f64));
    let sigma = linalg::centered_gram(&r, &mu) / m as f64;
    // Exact symmetry despite summation order.
    let sigma = (&sigma + sigma.transpose()) * 0.5;

    let mut b = DMatrix::zeros(n + 1, n);
    b.row_mut(0).fill(1.0);
    b.view_mut((1, 0), (n, n)).fill_diagonal(1.0);
    let mut l = DVector::zeros(n + 1);
    l[0] = 1.0;
    let mut u = DVector::from_element(n + 1, f64::INFINITY);
    u[0] = 1.0;

    Ok(CvqpProblem {
        p: Quadratic::Dense(sigma * cfg.gamma),
        q: -mu,
        a: -r,
        b,
        l,
        u,
        beta: cfg.beta,
        kappa: cfg.kappa,
    })
}

/// CVaR of the equal-weight portfolio's losses plus `margin`.
///
/// The equal-weight portfolio is feasible for the side constraints, so any
/// `margin > 0` yields a problem with a strictly feasible point.
pub fn equal_weight_kappa(problem: &CvqpProblem, margin: f64) -> Result<f64> {
    let n = problem.n();
    let x = DVector::from_element(n, 1.0 / n as f64);
    let losses = linalg::mul(&problem.a, &x);
    Ok(cvar(losses.as_slice(), problem.beta)? + margin)
}
