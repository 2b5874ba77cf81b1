use serde::{Deserialize, Serialize};

use crate::error::{CvqpError, Result};

/// ADMM hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Initial penalty.
    pub rho0: f64,
    /// Over-relaxation, in (0, 2).
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Residual ratio that triggers a penalty change.
    pub mu: f64,
    /// Factor applied to rho on each change.
    pub rho_scale: f64,
    /// Iterations between penalty updates.
    pub rho_update_interval: usize,
    pub max_iter: usize,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub adaptive_rho: bool,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Iterations between history records.
    pub history_interval: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            rho0: 1e-2,
            alpha: 1.7,
            eps_abs: 1e-4,
            eps_rel: 1e-3,
            mu: 10.0,
            rho_scale: 2.0,
            rho_update_interval: 50,
            max_iter: 100_000,
            time_limit: None,
            adaptive_rho: true,
            rho_min: 1e-6,
            rho_max: 1e6,
            history_interval: 25,
        }
    }
}

impl SolverSettings {
    /// Same settings with both tolerances set to `eps`.
    pub fn with_tolerance(mut self, eps: f64) -> Self {
        self.eps_abs = eps;
        self.eps_rel = eps;
        self
    }

    /// Slack allowed on the CVaR and box constraints of a converged solution.
    pub fn feasibility_tol(&self) -> f64 {
        10.0 * self.eps_abs
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CvqpError::InvalidSettings(msg));
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return bad(format!("rho0 must be positive, got {}", self.rho0));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return bad(format!("alpha must lie in (0, 2), got {}", self.alpha));
        }
        if !(self.eps_abs > 0.0) || !(self.eps_rel > 0.0) {
            return bad(format!(
                "tolerances must be positive, got eps_abs = {}, eps_rel = {}",
                self.eps_abs, self.eps_rel
            ));
        }
        if !(self.mu > 1.0) {
            return bad(format!("mu must exceed 1, got {}", self.mu));
        }
        if !(self.rho_scale > 1.0) {
            return bad(format!("rho_scale must exceed 1, got {}", self.rho_scale));
        }
        if self.rho_update_interval == 0 || self.max_iter == 0 || self.history_interval == 0 {
            return bad("iteration counts must be positive".into());
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return bad(format!("time limit must be positive, got {t}"));
            }
        }
        if !(self.rho_min > 0.0 && self.rho_min <= self.rho_max) {
            return bad(format!(
                "need 0 < rho_min <= rho_max, got [{}, {}]",
                self.rho_min, self.rho_max
            ));
        }
        Ok(())
    }
}
