//! Euclidean projection onto `{z : f_k(z) <= d}` in O(m log m).
//!
//! The input is sorted in descending order, projected with a decrease loop
//! whose state has constant size, and unsorted. At every step the working
//! vector has three blocks:
//!
//! ```text
//! v'_1 - eta >= ... >= v'_nu - eta >= a_t = ... = a_t >= v'_{nu+nt+1} >= ... >= v'_m
//! |------- untied (nu) -------|       |- tied (nt) -|   |------ unaltered ------|
//! ```
//!
//! The tied block straddles positions `k` and `k + 1`. A step lowers the
//! untied block at rate `nt / (k - nu)` and the tied block at rate 1 until
//! the untied tail meets the tied value, the tied block meets the next
//! unaltered entry, or the top-k sum reaches `d`.

use crate::cvar::tail_count;
use crate::error::{CvqpError, Result};
use crate::problem::CvarSpec;

/// Inputs whose top-k sum exceeds `d` by less than this fraction of
/// `|d| + sum |v'_i| (i <= k)` are treated as feasible. Projection outputs
/// land within rounding of `d`, so this makes projection idempotent.
pub const FEASIBILITY_RTOL: f64 = 1e-10;

/// Indices that sort `v` in nonincreasing order; ties keep their input order.
pub fn sort_permutation(v: &[f64]) -> Result<Vec<usize>> {
    if let Some(index) = v.iter().position(|x| x.is_nan()) {
        return Err(CvqpError::NonFinite { index });
    }
    let mut keyed: Vec<(f64, usize)> = v.iter().copied().zip(0..).collect();
    // Values are NaN-free, so partial_cmp is total; -0.0 and 0.0 compare equal.
    keyed.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(keyed.into_iter().map(|(_, i)| i).collect())
}

/// Constant-size state of the decrease loop.
#[derive(Debug, Clone)]
pub struct ProjectionState<'a> {
    /// Decrease steps taken so far.
    pub step: usize,
    pub n_untied: usize,
    pub n_tied: usize,
    /// Total decrease applied to the untied entries.
    pub eta: f64,
    /// Sum of the k largest entries of the working vector.
    pub top_sum: f64,
    /// Common value of the tied block (`-inf` before the first tie).
    pub tied_value: f64,
    /// Current value of the last untied entry.
    pub last_untied: f64,
    /// Value of the first unaltered entry.
    pub next_value: f64,
    sorted: &'a [f64],
    order: &'a [usize],
}

impl<'a> ProjectionState<'a> {
    /// Initial state for `sorted` (nonincreasing) obtained from the input via `order`.
    pub fn new(sorted: &'a [f64], order: &'a [usize], spec: &CvarSpec) -> Self {
        let k = spec.k;
        ProjectionState {
            step: 0,
            n_untied: k,
            n_tied: 0,
            eta: 0.0,
            top_sum: sorted[..k].iter().sum(),
            tied_value: f64::NEG_INFINITY,
            last_untied: sorted[k - 1],
            next_value: sorted.get(k).copied().unwrap_or(f64::NEG_INFINITY),
            sorted,
            order,
        }
    }

    pub fn sorted(&self) -> &'a [f64] {
        self.sorted
    }

    pub fn order(&self) -> &'a [usize] {
        self.order
    }

    /// Decrease rates `(untied rate, top-k sum rate)` in effect for the next step.
    fn rates(&self, k: usize) -> (f64, f64) {
        if self.n_tied == 0 {
            (1.0, k as f64)
        } else {
            let free = (k - self.n_untied) as f64;
            let r = self.n_tied as f64 / free;
            (r, self.n_untied as f64 * r + free)
        }
    }

    /// One decrease step. Returns `true` once the top-k sum has reached `d`.
    pub fn decrease_step(&mut self, spec: &CvarSpec) -> bool {
        let k = spec.k;
        let m = self.sorted.len();
        let (nu, nt) = (self.n_untied, self.n_tied);
        let (untied_rate, sum_rate) = self.rates(k);

        // Untied tail meets the tied block.
        let s1 = if nu == 0 || nt == 0 {
            f64::INFINITY
        } else {
            ((self.last_untied - self.tied_value) / (untied_rate - 1.0)).max(0.0)
        };
        // Front of the moving block meets the first unaltered entry.
        let s2 = if nu + nt == m {
            f64::INFINITY
        } else {
            let front = if nt == 0 { self.last_untied } else { self.tied_value };
            (front - self.next_value).max(0.0)
        };
        // Top-k sum reaches d.
        let s3 = (self.top_sum - spec.d) / sum_rate;

        self.step += 1;
        let s0 = s3.min(s1).min(s2);
        // Rates are the ones in effect during this step (pre-update counts).
        self.eta += s0 * untied_rate;
        self.top_sum -= s0 * sum_rate;
        if nt > 0 {
            self.tied_value -= s0;
        }

        if s3 <= s1.min(s2) {
            if nu > 0 {
                self.last_untied = self.sorted[nu - 1] - self.eta;
            }
            return true;
        }

        if nt == 0 {
            // Entries k and k+1 now tie: the block occupies positions k..=k+1.
            self.n_untied = k - 1;
            self.n_tied = 2;
            self.tied_value = self.sorted[k];
        } else if s1 <= s2 {
            self.n_untied -= 1;
            self.n_tied += 1;
        } else {
            self.n_tied += 1;
        }
        if self.n_untied > 0 {
            self.last_untied = self.sorted[self.n_untied - 1] - self.eta;
        }
        let edge = self.n_untied + self.n_tied;
        if edge < m {
            self.next_value = self.sorted[edge];
        }
        false
    }

    /// Working vector in sorted order.
    pub fn sorted_output(&self) -> Vec<f64> {
        let (nu, nt) = (self.n_untied, self.n_tied);
        let mut z = Vec::with_capacity(self.sorted.len());
        z.extend(self.sorted[..nu].iter().map(|v| v - self.eta));
        z.extend(std::iter::repeat_n(self.tied_value, nt));
        z.extend_from_slice(&self.sorted[nu + nt..]);
        z
    }

    /// Working vector mapped back to the input order.
    pub fn output(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.sorted.len()];
        for (value, &i) in self.sorted_output().into_iter().zip(self.order) {
            z[i] = value;
        }
        z
    }
}

/// Projection together with the final decrease-loop state.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedProjection {
    pub z: Vec<f64>,
    /// Sorting permutation of the input (descending).
    pub order: Vec<usize>,
    /// Decrease steps executed (0 when the input was already feasible).
    pub steps: usize,
    pub n_untied: usize,
    pub n_tied: usize,
    pub eta: f64,
    pub tied_value: f64,
    pub feasible_input: bool,
}

fn check_input(v: &[f64], spec: &CvarSpec) -> Result<()> {
    spec.check(v.len())?;
    if let Some(index) = v.iter().position(|x| !x.is_finite()) {
        return Err(CvqpError::NonFinite { index });
    }
    Ok(())
}

/// Projects `v` onto `{z : f_k(z) <= d}` and reports the loop state.
pub fn project_sum_k_largest_traced(v: &[f64], spec: &CvarSpec) -> Result<TracedProjection> {
    check_input(v, spec)?;
    let order = sort_permutation(v)?;
    let sorted: Vec<f64> = order.iter().map(|&i| v[i]).collect();

    let mut state = ProjectionState::new(&sorted, &order, spec);
    let scale = spec.d.abs() + sorted[..spec.k].iter().map(|x| x.abs()).sum::<f64>();
    if state.top_sum <= spec.d + FEASIBILITY_RTOL * scale {
        return Ok(TracedProjection {
            z: v.to_vec(),
            order,
            steps: 0,
            n_untied: spec.k,
            n_tied: 0,
            eta: 0.0,
            tied_value: f64::NEG_INFINITY,
            feasible_input: true,
        });
    }

    let limit = v.len() + 1;
    while !state.decrease_step(spec) {
        debug_assert!(state.step < limit, "decrease loop exceeded m + 1 steps");
        if state.step >= limit {
            break;
        }
    }
    let z = state.output();
    Ok(TracedProjection {
        z,
        steps: state.step,
        n_untied: state.n_untied,
        n_tied: state.n_tied,
        eta: state.eta,
        tied_value: state.tied_value,
        feasible_input: false,
        order,
    })
}

/// Euclidean projection of `v` onto `{z : f_k(z) <= d}`.
///
/// Feasible inputs are returned unchanged.
pub fn project_sum_k_largest(v: &[f64], spec: &CvarSpec) -> Result<Vec<f64>> {
    project_sum_k_largest_traced(v, spec).map(|t| t.z)
}

/// Euclidean projection of `v` onto `{z : cvar_beta(z) <= kappa}`.
pub fn project_cvar(v: &[f64], beta: f64, kappa: f64) -> Result<Vec<f64>> {
    let k = tail_count(beta, v.len())?;
    project_sum_k_largest(v, &CvarSpec::new(k, kappa * k as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvar::{cvar, sum_k_largest};
    use proptest::prelude::*;

    fn assert_close(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (i, (g, w)) in got.iter().zip(want).enumerate() {
            assert!((g - w).abs() <= tol, "entry {i}: {g} vs {w} (got {got:?})");
        }
    }

    #[test]
    fn sort_permutation_examples() {
        assert_eq!(sort_permutation(&[0.0, 4.0, 1.0, 3.0]).unwrap(), vec![1, 3, 2, 0]);
        assert_eq!(sort_permutation(&[2.0; 5]).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(sort_permutation(&[0.0, -0.0, 0.0]).unwrap(), vec![0, 1, 2]);
        assert!(sort_permutation(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn feasible_input_is_returned_bitwise() {
        let v = [1.0, 2.0, 3.0];
        let z = project_sum_k_largest(&v, &CvarSpec::new(2, 10.0)).unwrap();
        assert_eq!(z, v);
    }

    #[test]
    fn max_entry_moves_to_bound() {
        let z = project_sum_k_largest(&[2.0, 0.0], &CvarSpec::new(1, 1.0)).unwrap();
        assert_close(&z, &[1.0, 0.0], 1e-15);
        let z = project_cvar(&[2.0, 0.0], 0.5, 1.0).unwrap();
        assert_close(&z, &[1.0, 0.0], 1e-15);
    }

    #[test]
    fn sorted_examples() {
        let z = project_sum_k_largest(&[4.0, 3.0, 1.0, 0.0], &CvarSpec::new(2, 5.0)).unwrap();
        assert_close(&z, &[3.0, 2.0, 1.0, 0.0], 1e-14);
        let z = project_sum_k_largest(&[4.0, 3.0, 1.0, 0.0], &CvarSpec::new(2, 0.0)).unwrap();
        assert_close(&z, &[0.0, 0.0, 0.0, 0.0], 1e-14);
    }

    #[test]
    fn unsorted_example() {
        let z = project_sum_k_largest(&[0.0, 4.0, 1.0, 3.0], &CvarSpec::new(2, 5.0)).unwrap();
        assert_close(&z, &[0.0, 3.0, 1.0, 2.0], 1e-14);
    }

    #[test]
    fn first_step_terminates_on_sum() {
        let sorted = [4.0, 3.0, 1.0, 0.0];
        let order = [0, 1, 2, 3];
        let spec = CvarSpec::new(2, 5.0);
        let mut st = ProjectionState::new(&sorted, &order, &spec);
        assert_eq!(st.top_sum, 7.0);
        assert!(st.decrease_step(&spec));
        assert_eq!(st.eta, 1.0);
        assert_eq!(st.top_sum, 5.0);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_forms_tie_then_terminates() {
        let sorted = [4.0, 3.0, 1.0, 0.0];
        let order = [0, 1, 2, 3];
        let spec = CvarSpec::new(2, 0.0);
        let mut st = ProjectionState::new(&sorted, &order, &spec);
        assert!(!st.decrease_step(&spec));
        assert_eq!(st.eta, 2.0);
        assert_eq!(st.top_sum, 3.0);
        assert_eq!((st.n_untied, st.n_tied), (1, 2));
        assert_eq!(st.tied_value, 1.0);
        assert_eq!(st.last_untied, 2.0);
        assert_eq!(st.next_value, 0.0);

        // s1 = s2 = s3 = 1: the step ties everything and meets the bound.
        assert!(st.decrease_step(&spec));
        assert_close(&st.sorted_output(), &[0.0, 0.0, 0.0, 0.0], 1e-15);
        assert_eq!(st.step, 2);
    }

    #[test]
    fn fully_tied_block_terminates_in_one_step() {
        // k = 2 with all four entries tied: s1 = s2 = inf, rate k.
        let sorted = [1.0, 1.0, 1.0, 1.0];
        let order = [0, 1, 2, 3];
        let spec = CvarSpec::new(2, 1.0);
        let mut st = ProjectionState::new(&sorted, &order, &spec);
        st.n_untied = 0;
        st.n_tied = 4;
        st.tied_value = 1.0;
        assert!(st.decrease_step(&spec));
        assert_close(&st.sorted_output(), &[0.5; 4], 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            project_sum_k_largest(&[1.0, 2.0], &CvarSpec::new(3, 0.0)),
            Err(CvqpError::KOutOfRange { .. })
        ));
        assert!(matches!(
            project_sum_k_largest(&[1.0, f64::NAN], &CvarSpec::new(1, 0.0)),
            Err(CvqpError::NonFinite { index: 1 })
        ));
        assert!(project_sum_k_largest(&[1.0, f64::INFINITY], &CvarSpec::new(1, 0.0)).is_err());
        assert!(project_cvar(&[1.0], 1.5, 0.0).is_err());
    }

    #[test]
    fn infinite_bound_is_vacuous() {
        let v = [5.0, -2.0, 7.0];
        assert_eq!(project_cvar(&v, 0.5, f64::INFINITY).unwrap(), v);
    }

    fn vec_and_spec() -> impl Strategy<Value = (Vec<f64>, CvarSpec)> {
        (1usize..60).prop_flat_map(|m| {
            (prop::collection::vec(-3.0f64..3.0, m), 1..=m, 0.0f64..1.0).prop_map(|(v, k, frac)| {
                let fk = sum_k_largest(&v, k).unwrap();
                // Bound between a clearly infeasible and a slightly infeasible value.
                let d = fk - (1.0 + fk.abs()) * frac * 2.0;
                (v, CvarSpec::new(k, d))
            })
        })
    }

    proptest! {
        #[test]
        fn projection_is_idempotent((v, spec) in vec_and_spec()) {
            let z = project_sum_k_largest(&v, &spec).unwrap();
            let zz = project_sum_k_largest(&z, &spec).unwrap();
            prop_assert_eq!(z, zz);
        }

        #[test]
        fn projection_hits_bound((v, spec) in vec_and_spec()) {
            let t = project_sum_k_largest_traced(&v, &spec).unwrap();
            let fk = sum_k_largest(&t.z, spec.k).unwrap();
            prop_assert!(fk <= spec.d + 1e-8 * spec.d.abs().max(1.0));
            if !t.feasible_input {
                prop_assert!((fk - spec.d).abs() <= 1e-8 * spec.d.abs().max(1.0));
            }
            prop_assert!(t.steps <= v.len() + 1);
        }

        #[test]
        fn decrease_is_nonnegative_and_structured((v, spec) in vec_and_spec()) {
            let t = project_sum_k_largest_traced(&v, &spec).unwrap();
            for (rank, &i) in t.order.iter().enumerate() {
                let delta = v[i] - t.z[i];
                prop_assert!(delta >= -1e-12);
                if !t.feasible_input {
                    if rank < t.n_untied {
                        prop_assert!((delta - t.eta).abs() <= 1e-9 * (1.0 + t.eta.abs()));
                    } else if rank >= t.n_untied + t.n_tied {
                        prop_assert_eq!(delta, 0.0);
                    }
                }
            }
        }

        #[test]
        fn cvar_projection_is_feasible(
            v in prop::collection::vec(-2.0f64..2.0, 1..80),
            beta in 0.05f64..0.95,
            kappa in -1.0f64..1.0,
        ) {
            let z = project_cvar(&v, beta, kappa).unwrap();
            prop_assert!(cvar(&z, beta).unwrap() <= kappa + 1e-9);
        }
    }
}
