//! Iterates and one ADMM sweep.
//!
//! With the stacked map `Â = [A; B]`, `ẑ = (z, z̃)` and scaled duals
//! `û = (u, ũ)`, a sweep performs
//!
//! ```text
//! x      = -M⁻¹ (q - rho Â'(ẑ - û))
//! ẑ_half = alpha Â x + (1 - alpha) ẑ
//! z      = proj_cvar(z_half + u),   z̃ = clip(z̃_half + ũ, l, u)
//! û      = û + ẑ_half - ẑ
//! ```

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::{self, KktFactor};
use super::settings::SolverSettings;
use crate::error::Result;
use crate::cvar::sum_k_largest;
use crate::problem::{CvarSpec, CvqpProblem};
use crate::projection::project_sum_k_largest;

/// Residual norms and the tolerances they are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖Âx - ẑ‖₂`.
    pub r_norm: f64,
    /// `rho ‖Â'(ẑ - ẑ_prev)‖₂`.
    pub s_norm: f64,
    pub eps_pri: f64,
    pub eps_dual: f64,
}

impl Residuals {
    pub fn converged(&self) -> bool {
        self.r_norm <= self.eps_pri && self.s_norm <= self.eps_dual
    }

    /// `max(r / eps_pri, s / eps_dual)`; at most 1 once converged.
    pub fn kkt_ratio(&self) -> f64 {
        (self.r_norm / self.eps_pri).max(self.s_norm / self.eps_dual)
    }
}

/// Entrywise projection onto `[l, u]`.
pub fn clip(v: &DVector<f64>, l: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        v.len(),
        v.iter().zip(l.iter().zip(u.iter())).map(|(&vi, (&lo, &hi))| {
            if vi < lo {
                lo
            } else if vi > hi {
                hi
            } else {
                vi
            }
        }),
    )
}

/// State owned by one solve.
#[derive(Debug, Clone)]
pub struct Workspace {
    factor: KktFactor,
    /// `A'A + B'B`.
    gram: DMatrix<f64>,
    pub spec: CvarSpec,
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub z_box: DVector<f64>,
    pub u: DVector<f64>,
    pub u_box: DVector<f64>,
    /// `Â'ẑ` for the current iterates.
    at_z: DVector<f64>,
    /// `Â'û` for the current iterates.
    at_u: DVector<f64>,
    /// `Ax` and `Bx` for the current `x`.
    ax: DVector<f64>,
    bx: DVector<f64>,
    pub factorization_seconds: f64,
    pub projection_seconds: f64,
    pub factorizations: usize,
}

impl Workspace {
    /// Forms `A'A + B'B`, factorizes `M` at `settings.rho0`, and starts from zero.
    pub fn new(problem: &CvqpProblem, spec: CvarSpec, settings: &SolverSettings) -> Result<Self> {
        let start = Instant::now();
        let gram = linalg::gram(&problem.a) + linalg::gram(&problem.b);
        let factor = KktFactor::new(&problem.p, &gram, settings.rho0)?;
        let (n, m, p) = (problem.n(), problem.m(), problem.p_rows());
        Ok(Workspace {
            factor,
            gram,
            spec,
            x: DVector::zeros(n),
            z: DVector::zeros(m),
            z_box: DVector::zeros(p),
            u: DVector::zeros(m),
            u_box: DVector::zeros(p),
            at_z: DVector::zeros(n),
            at_u: DVector::zeros(n),
            ax: DVector::zeros(m),
            bx: DVector::zeros(p),
            factorization_seconds: start.elapsed().as_secs_f64(),
            projection_seconds: 0.0,
            factorizations: 1,
        })
    }

    pub fn rho(&self) -> f64 {
        self.factor.rho()
    }

    /// Overwrites the iterates (for warm points in tests and tools).
    pub fn set_iterates(
        &mut self,
        problem: &CvqpProblem,
        x: DVector<f64>,
        z: DVector<f64>,
        z_box: DVector<f64>,
        u: DVector<f64>,
        u_box: DVector<f64>,
    ) {
        self.x = x;
        self.z = z;
        self.z_box = z_box;
        self.u = u;
        self.u_box = u_box;
        self.at_z = stacked_tr_mul(problem, &self.z, &self.z_box);
        self.at_u = stacked_tr_mul(problem, &self.u, &self.u_box);
        self.ax = linalg::mul(&problem.a, &self.x);
        self.bx = linalg::mul(&problem.b, &self.x);
    }

    /// Largest violation by `x` of `cvar(Ax) <= kappa` and `l <= Bx <= u`;
    /// negative when `x` is strictly feasible.
    pub fn violation(&self, problem: &CvqpProblem) -> Result<f64> {
        let k = self.spec.k;
        let cvar_excess = (sum_k_largest(self.ax.as_slice(), k)? - self.spec.d) / k as f64;
        let box_excess = self
            .bx
            .iter()
            .zip(problem.l.iter().zip(problem.u.iter()))
            .map(|(&v, (&lo, &hi))| (lo - v).max(v - hi))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(cvar_excess.max(box_excess))
    }

    /// Minimizer of `(1/2) x'Mx + p'x` with `p = q - rho Â'(ẑ - û)`.
    pub fn x_update(&self, problem: &CvqpProblem) -> DVector<f64> {
        let rho = self.rho();
        let linear = &problem.q - (&self.at_z - &self.at_u) * rho;
        -self.factor.solve(&linear)
    }

    /// One full ADMM sweep; returns the residuals after it.
    pub fn iterate(&mut self, problem: &CvqpProblem, settings: &SolverSettings) -> Result<Residuals> {
        let alpha = settings.alpha;
        let rho = self.rho();

        self.x = self.x_update(problem);
        let ax = linalg::mul(&problem.a, &self.x);
        let bx = linalg::mul(&problem.b, &self.x);

        let z_half = &ax * alpha + &self.z * (1.0 - alpha);
        let z_box_half = &bx * alpha + &self.z_box * (1.0 - alpha);

        let cvar_arg = &z_half + &self.u;
        let box_arg = &z_box_half + &self.u_box;
        let spec = self.spec;
        let t0 = Instant::now();
        // The two projections are independent.
        let (z_new, z_box_new) = rayon::join(
            || project_sum_k_largest(cvar_arg.as_slice(), &spec),
            || clip(&box_arg, &problem.l, &problem.u),
        );
        self.projection_seconds += t0.elapsed().as_secs_f64();
        let z_new = DVector::from_vec(z_new?);

        self.u = cvar_arg - &z_new;
        self.u_box = box_arg - &z_box_new;
        self.z = z_new;
        self.z_box = z_box_new;

        let (at_z_new, at_u_new) = stacked_tr_mul_pair(problem, (&self.z, &self.z_box), (&self.u, &self.u_box));
        self.at_u = at_u_new;
        let s_norm = rho * (&at_z_new - &self.at_z).norm();
        self.at_z = at_z_new;

        let r_norm = ((&ax - &self.z).norm_squared() + (&bx - &self.z_box).norm_squared()).sqrt();
        let ax_norm = (ax.norm_squared() + bx.norm_squared()).sqrt();
        self.ax = ax;
        self.bx = bx;
        let z_norm = (self.z.norm_squared() + self.z_box.norm_squared()).sqrt();
        let rows = (problem.m() + problem.p_rows()) as f64;
        let eps_pri = rows.sqrt() * settings.eps_abs + settings.eps_rel * ax_norm.max(z_norm);
        let eps_dual = (problem.n() as f64).sqrt() * settings.eps_abs + settings.eps_rel * rho * self.at_u.norm();

        Ok(Residuals { r_norm, s_norm, eps_pri, eps_dual })
    }

    /// Adaptive penalty rule; returns whether `M` was refactorized.
    pub fn update_rho(
        &mut self,
        problem: &CvqpProblem,
        residuals: &Residuals,
        settings: &SolverSettings,
    ) -> Result<bool> {
        let rho = self.rho();
        let target = if residuals.r_norm > settings.mu * residuals.s_norm {
            (rho * settings.rho_scale).min(settings.rho_max)
        } else if residuals.s_norm > settings.mu * residuals.r_norm {
            (rho / settings.rho_scale).max(settings.rho_min)
        } else {
            rho
        };
        if target == rho {
            return Ok(false);
        }
        self.set_rho(problem, target)?;
        Ok(true)
    }

    /// Changes the penalty, rescaling the scaled duals so `y = rho u` is kept.
    pub fn set_rho(&mut self, problem: &CvqpProblem, rho: f64) -> Result<()> {
        let ratio = self.rho() / rho;
        let start = Instant::now();
        self.factor = KktFactor::new(&problem.p, &self.gram, rho)?;
        self.factorization_seconds += start.elapsed().as_secs_f64();
        self.factorizations += 1;
        self.u *= ratio;
        self.u_box *= ratio;
        self.at_u *= ratio;
        Ok(())
    }
}

/// `(A'a + B'b, A'c + B'd)` with one pass over each matrix.
fn stacked_tr_mul_pair(
    problem: &CvqpProblem,
    (a_first, b_first): (&DVector<f64>, &DVector<f64>),
    (a_second, b_second): (&DVector<f64>, &DVector<f64>),
) -> (DVector<f64>, DVector<f64>) {
    let (fa, sa) = linalg::tr_mul_pair(&problem.a, a_first, a_second);
    let (fb, sb) = linalg::tr_mul_pair(&problem.b, b_first, b_second);
    (fa + fb, sa + sb)
}

/// `A'a + B'b`.
fn stacked_tr_mul(problem: &CvqpProblem, a_part: &DVector<f64>, b_part: &DVector<f64>) -> DVector<f64> {
    linalg::tr_mul(&problem.a, a_part) + linalg::tr_mul(&problem.b, b_part)
}
