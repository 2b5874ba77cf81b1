use serde::{Deserialize, Serialize};

use super::rng::Stream;
use crate::cvar::{sum_k_largest, tail_count};
use crate::error::{CvqpError, Result};
use crate::problem::CvarSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub m: usize,
    pub beta: f64,
    /// Fraction of `f_k(v)` kept as the bound; smaller is harder.
    pub eta: f64,
    pub seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig { m: 10_000, beta: 0.95, eta: 0.5, seed: 0 }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(CvqpError::InvalidData("m must be positive".into()));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(CvqpError::InvalidData(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        tail_count(self.beta, self.m).map(|_| ())
    }
}

/// `v ~ U[0, 1]^m` and the bound `f_k(v) <= eta f_k(v)`, which `v` violates.
pub fn gen_projection(cfg: &ProjectionConfig) -> Result<(Vec<f64>, CvarSpec)> {
    cfg.validate()?;
    let mut rng = Stream::new(cfg.seed);
    let v: Vec<f64> = (0..cfg.m).map(|_| rng.uniform()).collect();
    let k = tail_count(cfg.beta, cfg.m)?;
    let d = cfg.eta * sum_k_largest(&v, k)?;
    Ok((v, CvarSpec::new(k, d)))
}
