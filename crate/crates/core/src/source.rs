use serde::{Deserialize, Serialize};

use crate::entropy::snap_probability;
use crate::error::{RdpError, Result};

/// Independent Bernoulli components in canonical form: every probability
/// folded into `[0, 1/2]` and sorted non-increasing.
///
/// Components above one half are complemented (the reconstruction of
/// `X ⊕ 1` has the same distortion and marginal gap), and the permutation
/// back to the caller's ordering is kept so results can be reported in the
/// original indexing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliVectorSource {
    q: Vec<f64>,
    flip_mask: Vec<bool>,
    permutation: Vec<usize>,
}

impl BernoulliVectorSource {
    /// Canonicalizes raw success probabilities.
    pub fn normalize(raw_q: &[f64]) -> Result<Self> {
        if raw_q.is_empty() {
            return Err(RdpError::Validation("source has no components".into()));
        }
        let mut folded = Vec::with_capacity(raw_q.len());
        let mut flip_mask = Vec::with_capacity(raw_q.len());
        for (i, &raw) in raw_q.iter().enumerate() {
            let u = snap_probability(raw, &format!("q[{i}]"))?;
            let flip = u > 0.5;
            flip_mask.push(flip);
            folded.push(if flip { 1.0 - u } else { u });
        }
        let mut permutation: Vec<usize> = (0..raw_q.len()).collect();
        // Stable: ties keep their original order.
        permutation.sort_by(|&a, &b| folded[b].total_cmp(&folded[a]));
        let q = permutation.iter().map(|&i| folded[i]).collect();
        Ok(BernoulliVectorSource { q, flip_mask, permutation })
    }

    /// `n` copies of the same probability.
    pub fn equal(q: f64, n: usize) -> Result<Self> {
        Self::normalize(&vec![q; n])
    }

    /// Canonical probabilities, non-increasing.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Whether the component at the given *original* index was complemented.
    pub fn flip_mask(&self) -> &[bool] {
        &self.flip_mask
    }

    /// `permutation()[k]` is the original index of sorted component `k`.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn original_index(&self, sorted: usize) -> usize {
        self.permutation[sorted]
    }

    /// Undoes sorting and complementing.
    pub fn raw_q(&self) -> Vec<f64> {
        let mut raw = vec![0.0; self.len()];
        for (k, &orig) in self.permutation.iter().enumerate() {
            raw[orig] = if self.flip_mask[orig] { 1.0 - self.q[k] } else { self.q[k] };
        }
        raw
    }

    /// Reorders per-component values from sorted order into the original order.
    pub fn to_original_order<T: Clone>(&self, sorted: &[T]) -> Vec<T> {
        let mut out: Vec<Option<T>> = vec![None; sorted.len()];
        for (k, v) in sorted.iter().enumerate() {
            out[self.permutation[k]] = Some(v.clone());
        }
        out.into_iter().map(|v| v.expect("permutation is a bijection")).collect()
    }

    pub fn sum_q(&self) -> f64 {
        self.q.iter().sum()
    }

    /// `Σ 2 q_i (1 - q_i)`: the distortion at which a source-independent
    /// reconstruction becomes feasible with no perception budget.
    pub fn zero_rate_distortion(&self) -> f64 {
        self.q.iter().map(|&q| 2.0 * q * (1.0 - q)).sum()
    }

    /// `Σ h2(q_i)`, the rate at zero distortion.
    pub fn entropy(&self) -> f64 {
        self.q.iter().map(|&q| crate::entropy::h2_unchecked(q)).sum()
    }
}
