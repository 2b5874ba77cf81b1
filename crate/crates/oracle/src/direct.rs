//! Problems solved in their own formulations, independent of the CVQP form.

use cvqp::problem::{CvarSpec, CvqpProblem, Quadratic};
use nalgebra::{DMatrix, DVector};

use crate::expand::expand_cvqp;
use crate::qp::{LinearRow, SparseQp};
use crate::OracleError;

/// Euclidean projection of `v` onto `{z : f_k(z) <= d}` through the
/// expanded QP in `z`.
pub fn project_via_qp(v: &[f64], spec: &CvarSpec) -> Result<Vec<f64>, OracleError> {
    let m = v.len();
    spec.check(m).map_err(|e| OracleError::Setup(e.to_string()))?;
    // k = ceil((1 - beta) m) must reproduce spec.k: pick beta mid-interval.
    let beta = 1.0 - (spec.k as f64 - 0.5) / m as f64;
    let problem = CvqpProblem {
        p: Quadratic::Diagonal(DVector::from_element(m, 1.0)),
        q: -DVector::from_column_slice(v),
        a: DMatrix::identity(m, m),
        b: DMatrix::zeros(0, m),
        l: DVector::zeros(0),
        u: DVector::zeros(0),
        beta,
        kappa: spec.d / spec.k as f64,
    };
    let expanded = expand_cvqp(&problem)?;
    if expanded.k != spec.k {
        return Err(OracleError::Setup(format!("tail size {} instead of {}", expanded.k, spec.k)));
    }
    Ok(expanded.solve()?.x.as_slice().to_vec())
}

/// Same as [`project_via_qp`] at level `beta` and limit `kappa`.
pub fn project_cvar_via_qp(v: &[f64], beta: f64, kappa: f64) -> Result<Vec<f64>, OracleError> {
    let spec = CvarSpec::for_level(beta, kappa, v.len()).map_err(|e| OracleError::Setup(e.to_string()))?;
    project_via_qp(v, &spec)
}

/// `minimize (1/2) x'Px + q'x + cvar_beta(Ax)` subject to `l <= Bx <= u`,
/// written with the CVaR in the objective through `(alpha, y)`.
#[allow(clippy::too_many_arguments)]
pub fn solve_cvar_objective(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
    beta: f64,
) -> Result<(DVector<f64>, f64), OracleError> {
    let (m, n) = a.shape();
    let k = cvqp::cvar::tail_count(beta, m).map_err(|e| OracleError::Setup(e.to_string()))?;
    let alpha = n + m;
    let mut h_upper = Vec::new();
    for j in 0..n {
        for i in 0..=j {
            if p[(i, j)] != 0.0 {
                h_upper.push((i, j, p[(i, j)]));
            }
        }
    }
    let mut g = vec![0.0; n + m + 1];
    g[..n].copy_from_slice(q.as_slice());
    g[alpha] = 1.0;
    for gi in &mut g[n..n + m] {
        *gi = 1.0 / k as f64;
    }
    let mut ineq = Vec::new();
    for i in 0..m {
        let mut coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, a[(i, j)])).collect();
        coeffs.push((alpha, -1.0));
        coeffs.push((n + i, -1.0));
        ineq.push(LinearRow::new(coeffs, 0.0));
        ineq.push(LinearRow::new(vec![(n + i, -1.0)], 0.0));
    }
    let mut eq = Vec::new();
    for r in 0..b.nrows() {
        let row: Vec<(usize, f64)> = (0..n).map(|j| (j, b[(r, j)])).collect();
        if l[r] == u[r] {
            eq.push(LinearRow::new(row, l[r]));
            continue;
        }
        if u[r] < f64::INFINITY {
            ineq.push(LinearRow::new(row.clone(), u[r]));
        }
        if l[r] > f64::NEG_INFINITY {
            ineq.push(LinearRow::new(row.iter().map(|&(j, c)| (j, -c)).collect(), -l[r]));
        }
    }
    let qp = SparseQp { n: n + m + 1, h_upper, g, eq, ineq };
    let s = qp.solve()?;
    Ok((DVector::from_column_slice(&s.v[..n]), s.objective))
}

/// Quantile regression by its pinball-loss LP over `(x, x0, r+, r-)`:
/// `minimize (1/m) sum tau r+_i + (1 - tau) r-_i` with
/// `u_i'x + x0 + r+_i - r-_i = y_i` and `r+, r- >= 0`.
///
/// Returns the slope, the intercept and the loss.
pub fn quantile_regression_lp(
    features: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: f64,
) -> Result<(DVector<f64>, f64, f64), OracleError> {
    let (m, n) = features.shape();
    let x0 = n;
    let plus = |i: usize| n + 1 + i;
    let minus = |i: usize| n + 1 + m + i;
    let nv = n + 1 + 2 * m;
    let mut g = vec![0.0; nv];
    for i in 0..m {
        g[plus(i)] = tau / m as f64;
        g[minus(i)] = (1.0 - tau) / m as f64;
    }
    let mut eq = Vec::with_capacity(m);
    let mut ineq = Vec::with_capacity(2 * m);
    for i in 0..m {
        let mut coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, features[(i, j)])).collect();
        coeffs.extend([(x0, 1.0), (plus(i), 1.0), (minus(i), -1.0)]);
        eq.push(LinearRow::new(coeffs, y[i]));
        ineq.push(LinearRow::new(vec![(plus(i), -1.0)], 0.0));
        ineq.push(LinearRow::new(vec![(minus(i), -1.0)], 0.0));
    }
    let qp = SparseQp { n: nv, h_upper: Vec::new(), g, eq, ineq };
    let s = qp.solve()?;
    Ok((DVector::from_column_slice(&s.v[..n]), s.v[x0], s.objective))
}
