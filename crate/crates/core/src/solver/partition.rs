//! The two boundary curves of the `(D, P)` plane and the region classifier.

use super::{BudgetPair, PlaneRegion, Working};
use crate::error::{RdpError, Result};
use crate::scalar::perception_floor;
use crate::source::BernoulliVectorSource;

/// Reverse water-filling level `w` with `Σ min(w, q_i) = D`, for
/// `0 <= D < Σ q_i`. `q` must be sorted non-increasing.
pub(crate) fn water_level(q: &[f64], distortion: f64) -> f64 {
    let mut saturated = 0.0;
    let m = q.len();
    // Walk from the smallest probability upward; each one either lies above
    // the level (stop) or is saturated at its own value.
    for (j, &qj) in q.iter().rev().enumerate() {
        let level = (distortion - saturated) / (m - j) as f64;
        if level <= qj {
            return level.max(0.0);
        }
        saturated += qj;
    }
    q.first().copied().unwrap_or(0.0)
}

/// Lower bound on `p_i` keeping `(d_i, p_i)` in `S_i ∪ V_i` for a water-filled
/// distortion `d_i <= q_i`.
pub(crate) fn slack_floor(d: f64, q: f64) -> f64 {
    if d >= q {
        q
    } else {
        perception_floor(d, q)
    }
}

pub(crate) fn t_of_d_working(w: &Working, distortion: f64) -> f64 {
    let level = water_level(&w.q, distortion);
    w.q.iter().map(|&q| slack_floor(level.min(q), q)).sum()
}

/// Perception level above which the perception constraint is inactive, for
/// `0 <= D < Σ q_i`: `T(D) = Σ d_i (1 - 2q_i) / (1 - 2d_i)` with `d_i` the
/// reverse water-filling allocation.
pub fn t_of_d(src: &BernoulliVectorSource, distortion: f64) -> Result<f64> {
    let w = Working::new(src);
    let total = w.sum_q();
    if !(distortion >= 0.0 && distortion < total) {
        return Err(RdpError::domain(format!(
            "T(D) needs 0 <= D < {total}, got D = {distortion}"
        )));
    }
    Ok(t_of_d_working(&w, distortion))
}

/// Minimum total perception compatible with zero rate, and the optimizers
/// that attain it.
#[derive(Debug, Clone, PartialEq)]
pub struct SOfD {
    pub value: f64,
    /// Index (in sorted order) of the partially raised component, if any.
    pub k: Option<usize>,
    pub d_k: f64,
    pub d: Vec<f64>,
    pub p: Vec<f64>,
}

pub(crate) fn s_of_d_working(w: &Working, distortion: f64) -> SOfD {
    let n = w.q.len();
    let cap: Vec<f64> = w.q.iter().map(|&q| 2.0 * q * (1.0 - q)).collect();
    // Components before k sit at (2q(1-q), 0), component k is partially raised
    // and components after k stay at (q, q).
    let mut below: f64 = 0.0;
    let mut above: f64 = w.q.iter().sum();
    for k in 0..n {
        above -= w.q[k];
        let mut d_k = distortion - below - above;
        if (d_k - cap[k]).abs() <= 1e-14 * distortion.max(1.0) {
            d_k = cap[k];
        }
        if d_k <= cap[k] {
            let d_k = d_k.clamp(w.q[k], cap[k]);
            let mut d = Vec::with_capacity(n);
            let mut p = Vec::with_capacity(n);
            for i in 0..n {
                if i < k {
                    d.push(cap[i]);
                    p.push(0.0);
                } else if i == k {
                    d.push(d_k);
                    p.push(((cap[k] - d_k) / (1.0 - 2.0 * w.q[k])).max(0.0));
                } else {
                    d.push(w.q[i]);
                    p.push(w.q[i]);
                }
            }
            let value = p[k] + w.q[k + 1..].iter().sum::<f64>();
            return SOfD { value, k: Some(k), d_k, d, p };
        }
        below += cap[k];
    }
    let extra = distortion - below;
    let d = spread(&cap, extra, &w.active_mask());
    SOfD { value: 0.0, k: None, d_k: 0.0, d, p: vec![0.0; n] }
}

/// Adds `amount` uniformly over the marked entries (all entries if none are marked).
pub(crate) fn spread(base: &[f64], amount: f64, mask: &[bool]) -> Vec<f64> {
    let marked = mask.iter().filter(|&&m| m).count();
    let (share, use_mask) = if marked == 0 {
        (amount / base.len() as f64, false)
    } else {
        (amount / marked as f64, true)
    };
    base.iter()
        .zip(mask)
        .map(|(&b, &m)| if !use_mask || m { b + share } else { b })
        .collect()
}

/// `S(D)` for `D >= Σ q_i`, with the optimizers of the underlying linear program.
pub fn s_of_d(src: &BernoulliVectorSource, distortion: f64) -> Result<SOfD> {
    let w = Working::new(src);
    let total = w.sum_q();
    if distortion.is_nan() || distortion < total {
        return Err(RdpError::domain(format!(
            "S(D) needs D >= {total}, got D = {distortion}"
        )));
    }
    Ok(s_of_d_working(&w, distortion))
}

/// Budgets within this relative distance of a boundary curve count as on it.
const BOUNDARY_SLACK: f64 = 1e-12;

pub(crate) fn classify_working(w: &Working, budget: BudgetPair) -> PlaneRegion {
    let (d, p) = (budget.distortion(), budget.perception());
    let p = p + BOUNDARY_SLACK * p.max(1.0);
    if d < w.sum_q() {
        if p >= t_of_d_working(w, d) {
            PlaneRegion::A
        } else {
            PlaneRegion::C
        }
    } else if p >= s_of_d_working(w, d).value {
        PlaneRegion::B
    } else {
        PlaneRegion::C
    }
}

/// Which of the three regions of the `(D, P)` plane the budget lies in.
/// Boundaries belong to `A` and `B`.
pub fn classify(src: &BernoulliVectorSource, budget: BudgetPair) -> PlaneRegion {
    classify_working(&Working::new(src), budget)
}
