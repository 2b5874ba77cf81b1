//! Sample CVaR and the sum-of-k-largest function it reduces to.
//!
//! For a sample `z` of `m` losses and level `beta`, the tail size is
//! `k = ceil((1 - beta) m)` and the sample CVaR is `f_k(z) / k`, where
//! `f_k` sums the `k` largest entries.

use crate::error::{CvqpError, Result};

/// Relative slack used when rounding `(1 - beta) m` up to an integer.
///
/// `(1 - 0.95) * 100` evaluates to `5.000000000000004` in binary floating
/// point; without the snap it would round up to 6.
const TAIL_SNAP: f64 = 1e-9;

/// Number of tail scenarios `k = ceil((1 - beta) m)`.
pub fn tail_count(beta: f64, m: usize) -> Result<usize> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(CvqpError::BadBeta(beta));
    }
    if m == 0 {
        return Err(CvqpError::KOutOfRange { k: 0, m });
    }
    let raw = (1.0 - beta) * m as f64;
    let nearest = raw.round();
    let k = if (raw - nearest).abs() <= TAIL_SNAP * nearest.max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    Ok((k as usize).clamp(1, m))
}

/// Sum of the `k` largest entries of `z`.
///
/// Runs in expected O(m) using selection rather than a full sort.
pub fn sum_k_largest(z: &[f64], k: usize) -> Result<f64> {
    let m = z.len();
    if k == 0 || k > m {
        return Err(CvqpError::KOutOfRange { k, m });
    }
    if k == m {
        return Ok(z.iter().sum());
    }
    let mut scratch = z.to_vec();
    scratch.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    Ok(scratch[..k].iter().sum())
}

/// Sample conditional value-at-risk of the losses `z` at level `beta`.
pub fn cvar(z: &[f64], beta: f64) -> Result<f64> {
    let k = tail_count(beta, z.len())?;
    Ok(sum_k_largest(z, k)? / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted_prefix_sum(z: &[f64], k: usize) -> f64 {
        let mut s = z.to_vec();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        s[..k].iter().sum()
    }

    #[test]
    fn tail_count_rounds_up() {
        assert_eq!(tail_count(0.95, 100).unwrap(), 5);
        assert_eq!(tail_count(0.85, 10).unwrap(), 2);
        assert_eq!(tail_count(0.9, 2000).unwrap(), 200);
        assert_eq!(tail_count(0.5, 4).unwrap(), 2);
        assert_eq!(tail_count(0.999, 10).unwrap(), 1);
    }

    #[test]
    fn tail_count_rejects_bad_beta() {
        assert_eq!(tail_count(1.0, 10), Err(CvqpError::BadBeta(1.0)));
        assert_eq!(tail_count(0.0, 10), Err(CvqpError::BadBeta(0.0)));
        assert!(tail_count(f64::NAN, 10).is_err());
    }

    #[test]
    fn sum_k_largest_small() {
        assert_eq!(sum_k_largest(&[3.0, 1.0, 2.0], 2).unwrap(), 5.0);
        assert_eq!(sum_k_largest(&[3.0, 1.0, 2.0], 3).unwrap(), 6.0);
        assert!(matches!(
            sum_k_largest(&[3.0, 1.0], 3),
            Err(CvqpError::KOutOfRange { k: 3, m: 2 })
        ));
        assert!(sum_k_largest(&[3.0], 0).is_err());
    }

    #[test]
    fn sum_k_largest_matches_full_sort() {
        use rand_core::{Rng, SeedableRng};
        let mut rng = rand_xoshiro::SplitMix64::seed_from_u64(7);
        for _ in 0..100 {
            let z: Vec<f64> = (0..50)
                .map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
                .collect();
            let k = 1 + (rng.next_u64() % 50) as usize;
            let got = sum_k_largest(&z, k).unwrap();
            assert!((got - sorted_prefix_sum(&z, k)).abs() < 1e-12);
        }
    }

    #[test]
    fn cvar_examples() {
        assert_eq!(cvar(&[1.0; 4], 0.3).unwrap(), 1.0);
        assert_eq!(cvar(&[4.0, 3.0, 1.0, 0.0], 0.5).unwrap(), 3.5);
    }

    /// Minimise the Rockafellar-Uryasev expression over a grid of alphas
    /// refined around the best point.
    fn ru_grid_min(z: &[f64], beta: f64) -> f64 {
        // Tail weight 1/k rather than 1/((1 - beta) m) so the expression
        // agrees with the rounded-up tail.
        let k = tail_count(beta, z.len()).unwrap() as f64;
        let ru = |alpha: f64| alpha + z.iter().map(|&zi| (zi - alpha).max(0.0)).sum::<f64>() / k;
        let lo = z.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (mut a, mut b) = (lo - 1.0, hi + 1.0);
        let mut best = f64::INFINITY;
        for _ in 0..6 {
            let steps = 2000;
            let h = (b - a) / steps as f64;
            let mut arg = a;
            for i in 0..=steps {
                let alpha = a + i as f64 * h;
                let val = ru(alpha);
                if val < best {
                    best = val;
                    arg = alpha;
                }
            }
            a = arg - 2.0 * h;
            b = arg + 2.0 * h;
        }
        best
    }

    #[test]
    fn cvar_matches_rockafellar_uryasev_grid() {
        use rand_core::{Rng, SeedableRng};
        let mut rng = rand_xoshiro::SplitMix64::seed_from_u64(11);
        let betas = [0.5, 0.8, 0.9, 0.95];
        for trial in 0..100 {
            let m = 20 + (rng.next_u64() % 60) as usize;
            let z: Vec<f64> = (0..m)
                .map(|_| 4.0 * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64) - 2.0)
                .collect();
            let beta = betas[trial % betas.len()];
            let got = cvar(&z, beta).unwrap();
            let want = ru_grid_min(&z, beta);
            assert!((got - want).abs() < 1e-6, "trial {trial}: {got} vs {want}");
        }
    }

    proptest! {
        #[test]
        fn cvar_translation_equivariant(
            z in prop::collection::vec(-10.0f64..10.0, 1..60),
            c in -100.0f64..100.0,
            beta in 0.05f64..0.95,
        ) {
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let lhs = cvar(&shifted, beta).unwrap();
            let rhs = cvar(&z, beta).unwrap() + c;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())) * z.len() as f64);
        }

        #[test]
        fn cvar_dominates_mean(z in prop::collection::vec(-10.0f64..10.0, 1..60), beta in 0.05f64..0.95) {
            let mean = z.iter().sum::<f64>() / z.len() as f64;
            prop_assert!(cvar(&z, beta).unwrap() >= mean - 1e-12);
        }

        #[test]
        fn sum_k_largest_convex_and_permutation_invariant(
            pair in (2usize..40).prop_flat_map(|m| (
                prop::collection::vec(-5.0f64..5.0, m),
                prop::collection::vec(-5.0f64..5.0, m),
                1..=m,
            )),
            theta in 0.0f64..1.0,
        ) {
            let (z1, z2, k) = pair;
            let mix: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
            let lhs = sum_k_largest(&mix, k).unwrap();
            let rhs = theta * sum_k_largest(&z1, k).unwrap() + (1.0 - theta) * sum_k_largest(&z2, k).unwrap();
            prop_assert!(lhs <= rhs + 1e-9);

            let mut reversed = z1.clone();
            reversed.reverse();
            prop_assert!((sum_k_largest(&reversed, k).unwrap() - sum_k_largest(&z1, k).unwrap()).abs() < 1e-12);
        }
    }
}
