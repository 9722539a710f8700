//! Shapley values from coalition values, the Monte-Carlo estimate over a
//! sampling plan, and the display normalization.
//!
//! The value of the empty coalition is fixed at 0 and never evaluated.

use std::collections::HashMap;

use crate::error::ShapleyError;
use crate::model::{full_mask, Coalition, MAX_FEATURES};
use crate::sampler::{SamplingPlan, DEFAULT_EXACT_CAP};

/// Coalition values `v(S)` for one input.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValueTable {
    n_features: usize,
    values: HashMap<Coalition, f64>,
}

impl ValueTable {
    pub fn new(n_features: usize) -> Self {
        assert!(
            (1..=MAX_FEATURES).contains(&n_features),
            "value tables hold 1..={MAX_FEATURES} features"
        );
        Self {
            n_features,
            values: HashMap::new(),
        }
    }

    /// Builds a complete table by evaluating `v` on every nonempty coalition.
    pub fn from_fn<F: FnMut(Coalition) -> f64>(n_features: usize, mut v: F) -> Self {
        let mut t = Self::new(n_features);
        for mask in 1..=full_mask(n_features) {
            let c = Coalition::from_mask(mask);
            t.insert(c, v(c));
        }
        t
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn insert(&mut self, coalition: Coalition, value: f64) {
        debug_assert!(coalition.fits(self.n_features));
        if !coalition.is_empty() {
            self.values.insert(coalition, value);
        }
    }

    /// `v(S)`; the empty coalition is 0 by convention.
    pub fn get(&self, coalition: Coalition) -> Option<f64> {
        if coalition.is_empty() {
            Some(self.v_empty())
        } else {
            self.values.get(&coalition).copied()
        }
    }

    pub fn v_empty(&self) -> f64 {
        0.0
    }

    pub fn v_full(&self) -> Option<f64> {
        self.get(Coalition::full(self.n_features))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Exact Shapley values:
/// `phi_i = sum_{S ⊆ N\{i}} |S|! (n-|S|-1)! / n! * (v(S ∪ {i}) - v(S))`.
pub fn exact_shapley(table: &ValueTable) -> Result<Vec<f64>, ShapleyError> {
    exact_shapley_capped(table, DEFAULT_EXACT_CAP)
}

pub fn exact_shapley_capped(table: &ValueTable, cap: usize) -> Result<Vec<f64>, ShapleyError> {
    let n = table.n_features();
    if n > cap {
        return Err(crate::error::SampleError::ExactModeCap { n, cap }.into());
    }
    let full = full_mask(n);
    let mut dense = vec![0.0; (full as usize) + 1];
    for mask in 1..=full {
        dense[mask as usize] = table
            .get(Coalition::from_mask(mask))
            .ok_or(ShapleyError::IncompleteTable(mask))?;
    }
    // weight[s] = s! (n-s-1)! / n!
    let weight: Vec<f64> = (0..n)
        .map(|s| {
            let mut w = 1.0;
            for k in 1..=s {
                w *= k as f64;
            }
            for k in 1..n - s {
                w *= k as f64;
            }
            for k in 1..=n {
                w /= k as f64;
            }
            w
        })
        .collect();
    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u64 << i;
        let mut acc = 0.0;
        for mask in 0..=full {
            if mask & bit == 0 {
                let s = mask.count_ones() as usize;
                acc += weight[s] * (dense[(mask | bit) as usize] - dense[mask as usize]);
            }
        }
        *p = acc;
    }
    Ok(phi)
}

/// Monte-Carlo estimate: for each feature, the mean value of the sampled
/// coalitions that contain it minus the mean of those that do not.
pub fn mc_shapley(table: &ValueTable, plan: &SamplingPlan) -> Result<Vec<f64>, ShapleyError> {
    let n = plan.n_features;
    if n == 1 {
        // The only coalition without the feature is the empty one.
        let full = Coalition::full(1);
        return Ok(vec![
            table.get(full).ok_or(ShapleyError::IncompleteTable(full.mask()))? - table.v_empty(),
        ]);
    }
    let values: Vec<(Coalition, f64)> = plan
        .coalitions
        .iter()
        .map(|c| table.get(*c).map(|v| (*c, v)).ok_or(ShapleyError::IncompleteTable(c.mask())))
        .collect::<Result<_, _>>()?;
    (0..n)
        .map(|i| {
            let (mut in_sum, mut in_n, mut out_sum, mut out_n) = (0.0, 0usize, 0.0, 0usize);
            for (c, v) in &values {
                if c.contains(i) {
                    in_sum += v;
                    in_n += 1;
                } else {
                    out_sum += v;
                    out_n += 1;
                }
            }
            if in_n == 0 || out_n == 0 {
                return Err(ShapleyError::PlanInvariantViolated(i));
            }
            Ok(in_sum / in_n as f64 - out_sum / out_n as f64)
        })
        .collect()
}

/// Clamps negatives to 0 and rescales to sum to one; falls back to the
/// uniform distribution when nothing positive remains.
pub fn normalize(raw: &[f64]) -> Vec<f64> {
    assert!(!raw.is_empty(), "normalize needs at least one value");
    let clamped: Vec<f64> = raw.iter().map(|x| if *x > 0.0 { *x } else { 0.0 }).collect();
    let sum: f64 = clamped.iter().sum();
    if sum > 1e-12 {
        clamped.iter().map(|x| x / sum).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    }
}
