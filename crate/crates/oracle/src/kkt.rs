//! Optimality certificate for a claimed projection onto `{z : f_k(z) <= d}`.
//!
//! At the projection, `v - z = lambda g` with `lambda >= 0` and `g` a
//! subgradient of `f_k` at `z`: one on entries above the k-th largest value
//! of `z`, in `[0, 1]` on entries equal to it, zero below, summing to `k`.

use cvqp::cvar::sum_k_largest;
use cvqp::generators::rng::Stream;
use cvqp::problem::CvarSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub passed: bool,
    /// `f_k(z) - d`.
    pub feasibility: f64,
    /// Most negative entry of `v - z`.
    pub min_delta: f64,
    /// Largest deviation from the subgradient structure.
    pub structure: f64,
    /// `|f_k(z) - d|` when `v != z`, zero otherwise.
    pub slackness: f64,
    /// Largest `<v - z, w - z>` over the sampled feasible `w`.
    pub variational: f64,
    pub tol: f64,
    pub failures: Vec<String>,
}

/// `1e-8 max(1, |d|)`.
pub fn default_tol(spec: &CvarSpec) -> f64 {
    1e-8 * spec.d.abs().max(1.0)
}

/// Checks `z` against `v` with `trials` random feasible comparison points.
pub fn check_projection_kkt(v: &[f64], z: &[f64], spec: &CvarSpec, trials: usize, seed: u64) -> KktReport {
    check_projection_kkt_with_tol(v, z, spec, trials, seed, default_tol(spec))
}

pub fn check_projection_kkt_with_tol(
    v: &[f64],
    z: &[f64],
    spec: &CvarSpec,
    trials: usize,
    seed: u64,
    tol: f64,
) -> KktReport {
    let m = v.len();
    let k = spec.k;
    let mut failures = Vec::new();
    if z.len() != m || k == 0 || k > m {
        return KktReport {
            passed: false,
            feasibility: f64::NAN,
            min_delta: f64::NAN,
            structure: f64::NAN,
            slackness: f64::NAN,
            variational: f64::NAN,
            tol,
            failures: vec!["dimension mismatch".into()],
        };
    }
    let delta: Vec<f64> = v.iter().zip(z).map(|(a, b)| a - b).collect();

    let fk = sum_k_largest(z, k).unwrap();
    let feasibility = fk - spec.d;
    if feasibility > tol {
        failures.push(format!("f_k(z) exceeds d by {feasibility:e}"));
    }

    let min_delta = delta.iter().copied().fold(f64::INFINITY, f64::min);
    if min_delta < -tol {
        failures.push(format!("v - z has entry {min_delta:e} < 0"));
    }

    // Threshold z_[k] and the multiplier read off the strict top block.
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let zk = sorted[k - 1];
    let above: Vec<f64> = (0..m).filter(|&i| z[i] > zk + tol).map(|i| delta[i]).collect();
    let tied: Vec<usize> = (0..m).filter(|&i| (z[i] - zk).abs() <= tol).collect();
    let lambda = if above.is_empty() {
        let tie_sum: f64 = tied.iter().map(|&i| delta[i]).sum();
        tie_sum / (k as f64)
    } else {
        above.iter().sum::<f64>() / above.len() as f64
    };
    let mut structure: f64 = 0.0;
    for &d in &above {
        structure = structure.max((d - lambda).abs());
    }
    for &i in &tied {
        structure = structure.max(delta[i] - lambda).max(-delta[i]);
    }
    for i in 0..m {
        if z[i] < zk - tol {
            structure = structure.max(delta[i].abs());
        }
    }
    // Subgradient weights sum to k.
    let total: f64 = delta.iter().sum();
    structure = structure.max((total - lambda * k as f64).abs() / k as f64);
    if structure > tol * (m as f64).sqrt().max(1.0) {
        failures.push(format!("v - z is not a multiple of a subgradient (gap {structure:e})"));
    }

    let moved = delta.iter().any(|d| d.abs() > tol);
    let slackness = if moved { feasibility.abs() } else { 0.0 };
    if slackness > tol {
        failures.push(format!("z moved but f_k(z) - d = {feasibility:e}"));
    }

    let variational = variational_margin(&delta, z, spec, trials, seed);
    let scale: f64 = delta.iter().map(|d| d * d).sum::<f64>().sqrt().max(1.0);
    if variational > tol * scale {
        failures.push(format!("<v - z, w - z> = {variational:e} > 0 for a feasible w"));
    }

    KktReport {
        passed: failures.is_empty(),
        feasibility,
        min_delta,
        structure,
        slackness,
        variational,
        tol,
        failures,
    }
}

/// Largest `<delta, w - z>` over feasible `w`: random perturbations of `z`
/// pulled back into the set by a uniform shift, which lowers `f_k` by `k`
/// times the shift. Half the samples are local, half at unit scale.
fn variational_margin(delta: &[f64], z: &[f64], spec: &CvarSpec, trials: usize, seed: u64) -> f64 {
    let m = z.len();
    let k = spec.k as f64;
    let mut rng = Stream::new(seed);
    let mut worst = f64::NEG_INFINITY;
    for t in 0..trials {
        let radius = if t % 2 == 0 { 1e-3 } else { 1.0 };
        let mut w: Vec<f64> = z.iter().map(|&zi| zi + radius * rng.normal()).collect();
        let excess = sum_k_largest(&w, spec.k).unwrap() - spec.d;
        if excess > 0.0 {
            let shift = excess / k;
            w.iter_mut().for_each(|wi| *wi -= shift);
        }
        let ip: f64 = (0..m).map(|i| delta[i] * (w[i] - z[i])).sum();
        worst = worst.max(ip);
    }
    if trials == 0 {
        0.0
    } else {
        worst
    }
}
