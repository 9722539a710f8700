//! Coalition plans for Shapley evaluation.
//!
//! Exact mode enumerates every nonempty subset. Monte-Carlo mode always
//! keeps the full set and the `n` single-omission sets, then draws
//! `ceil(ratio * (2^n - n - 2))` further distinct proper subsets uniformly
//! without replacement. The empty coalition is never part of a plan.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SampleError;
use crate::model::{full_mask, Coalition, Mode, MAX_FEATURES};

pub const DEFAULT_EXACT_CAP: usize = 12;

/// Plans larger than this are refused rather than materialized.
pub const MAX_PLAN_SIZE: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub n_features: usize,
    pub mode: Mode,
    pub ratio: f64,
    pub seed: u64,
    pub coalitions: Vec<Coalition>,
}

impl SamplingPlan {
    pub fn len(&self) -> usize {
        self.coalitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coalitions.is_empty()
    }
}

/// All `2^n - 1` nonempty coalitions in binary counting order.
pub fn enumerate_exact(n: usize, cap: usize) -> Result<SamplingPlan, SampleError> {
    if n == 0 {
        return Err(SampleError::NoFeatures);
    }
    if n > cap {
        return Err(SampleError::ExactModeCap { n, cap });
    }
    if n > MAX_FEATURES {
        return Err(SampleError::TooManyFeatures { n, max: MAX_FEATURES });
    }
    let full = full_mask(n);
    Ok(SamplingPlan {
        n_features: n,
        mode: Mode::Exact,
        ratio: 1.0,
        seed: 0,
        coalitions: (1..=full).map(Coalition::from_mask).collect(),
    })
}

/// Number of coalitions [`sample_mc`] returns.
pub fn mc_plan_size(n: usize, ratio: f64) -> u128 {
    let total = (1u128 << n) - 1;
    let extra = extra_pool_size(n);
    let drawn = (ratio * extra as f64).ceil() as u128;
    (n as u128 + 1 + drawn).min(total)
}

fn extra_pool_size(n: usize) -> u128 {
    ((1u128 << n) - 1).saturating_sub(n as u128 + 1)
}

pub fn sample_mc(n: usize, ratio: f64, seed: u64) -> Result<SamplingPlan, SampleError> {
    if n == 0 {
        return Err(SampleError::NoFeatures);
    }
    if n > MAX_FEATURES {
        return Err(SampleError::TooManyFeatures { n, max: MAX_FEATURES });
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(SampleError::InvalidRatio(ratio));
    }
    let size = mc_plan_size(n, ratio);
    if size > MAX_PLAN_SIZE {
        return Err(SampleError::PlanTooLarge(size));
    }

    let full = full_mask(n);
    let mut coalitions = vec![Coalition::from_mask(full)];
    // For n = 1 the only single omission is the empty set.
    if n > 1 {
        coalitions.extend((0..n).map(|i| Coalition::without(n, i)));
    }

    let pool = extra_pool_size(n);
    let k = (ratio * pool as f64).ceil() as u128;
    if k > 0 {
        let mut excluded: Vec<u64> = (0..n).map(|i| full & !(1u64 << i)).collect();
        excluded.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut extras: Vec<Coalition> = index::sample(&mut rng, pool as usize, k as usize)
            .into_iter()
            .map(|j| Coalition::from_mask(nth_extra_mask(j as u64, &excluded)))
            .collect();
        extras.sort_unstable();
        coalitions.extend(extras);
    }

    Ok(SamplingPlan {
        n_features: n,
        mode: Mode::MonteCarlo,
        ratio,
        seed,
        coalitions,
    })
}

/// The `j`-th mask (0-based, ascending) in `1..full` that is not a
/// single-omission mask. `excluded` must be sorted ascending.
fn nth_extra_mask(j: u64, excluded: &[u64]) -> u64 {
    let mut m = j + 1;
    for &e in excluded {
        if e <= m {
            m += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn exact_small() {
        let p = enumerate_exact(2, DEFAULT_EXACT_CAP).unwrap();
        let sets: Vec<Vec<usize>> = p.coalitions.iter().map(|c| c.indices().collect()).collect();
        assert_eq!(sets, vec![vec![0], vec![1], vec![0, 1]]);
        assert_eq!(enumerate_exact(3, DEFAULT_EXACT_CAP).unwrap().len(), 7);
    }

    #[test]
    fn exact_cap_is_twelve() {
        assert_eq!(enumerate_exact(12, DEFAULT_EXACT_CAP).unwrap().len(), 4095);
        assert_eq!(
            enumerate_exact(13, DEFAULT_EXACT_CAP).unwrap_err(),
            SampleError::ExactModeCap { n: 13, cap: 12 }
        );
    }

    #[test]
    fn ratio_zero_is_essential_only() {
        let p = sample_mc(5, 0.0, 7).unwrap();
        assert_eq!(p.len(), 6);
        assert_eq!(p.coalitions[0], Coalition::full(5));
        for i in 0..5 {
            assert!(p.coalitions.contains(&Coalition::without(5, i)));
        }
    }

    #[test]
    fn ratio_one_covers_everything() {
        let p = sample_mc(5, 1.0, 3).unwrap();
        assert_eq!(p.len(), 31);
        let mc: HashSet<_> = p.coalitions.into_iter().collect();
        let exact: HashSet<_> = enumerate_exact(5, 12).unwrap().coalitions.into_iter().collect();
        assert_eq!(mc, exact);
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        assert_eq!(sample_mc(8, 0.5, 42).unwrap(), sample_mc(8, 0.5, 42).unwrap());
        assert_ne!(
            sample_mc(8, 0.5, 42).unwrap().coalitions,
            sample_mc(8, 0.5, 43).unwrap().coalitions
        );
    }

    #[test]
    fn tiny_partitions() {
        assert_eq!(sample_mc(1, 0.0, 0).unwrap().coalitions, vec![Coalition::full(1)]);
        assert_eq!(sample_mc(1, 1.0, 0).unwrap().len(), 1);
        assert_eq!(sample_mc(2, 0.3, 0).unwrap().len(), 3);
    }

    #[test]
    fn nth_extra_skips_single_omissions() {
        let n = 4;
        let full = full_mask(n);
        let mut excluded: Vec<u64> = (0..n).map(|i| full & !(1u64 << i)).collect();
        excluded.sort_unstable();
        let got: Vec<u64> = (0..extra_pool_size(n) as u64).map(|j| nth_extra_mask(j, &excluded)).collect();
        let expected: Vec<u64> = (1..full).filter(|m| !excluded.contains(m)).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn bad_inputs() {
        assert_eq!(sample_mc(3, 1.5, 0).unwrap_err(), SampleError::InvalidRatio(1.5));
        assert_eq!(sample_mc(0, 0.0, 0).unwrap_err(), SampleError::NoFeatures);
        assert!(matches!(sample_mc(40, 0.5, 0), Err(SampleError::PlanTooLarge(_))));
        assert_eq!(sample_mc(40, 0.0, 0).unwrap().len(), 41);
    }
}
