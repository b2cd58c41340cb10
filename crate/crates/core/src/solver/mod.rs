//! Closed-form rate-distortion-perception function of a Bernoulli vector
//! source.
//!
//! The `(D, P)` quadrant splits into three regions. In `A` the perception
//! budget is slack and the answer is classic reverse water-filling; in `B` a
//! reconstruction independent of the source is feasible and the rate is
//! zero; in `C` both budgets bind and every component solves a two-equation
//! stationarity system coupled only through two shared multipliers.

mod component;
mod partition;
mod regions;

use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{RdpError, Result};
use crate::scalar::{Rate, ScalarRegion};
use crate::source::BernoulliVectorSource;

pub use component::{solve_component_c, zero_perception_distortion, ComponentSolution};
pub use partition::{classify, s_of_d, t_of_d, SOfD};
pub use regions::{
    rate_distortion, rdp, rdp_p_zero, rdp_p_zero_with, rdp_with, solve_region_a, solve_region_b, solve_region_c,
};

/// Components with `q` this close to one half are pulled to `1/2 - HALF_CLAMP`
/// inside the solver; several expressions divide by `1 - 2q`.
pub const HALF_CLAMP: f64 = 1e-9;

/// Default relative tolerance on the budget residuals.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Budget residuals must satisfy `|Σd - D| <= tol · max(1, D)`, same for `P`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: DEFAULT_TOL, max_iter: 200 }
    }
}

/// Total distortion and perception budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetPair {
    distortion: f64,
    perception: f64,
}

impl BudgetPair {
    pub fn new(distortion: f64, perception: f64) -> Result<Self> {
        for (name, v) in [("D", distortion), ("P", perception)] {
            if !v.is_finite() || v < 0.0 {
                return Err(RdpError::Validation(format!("{name} = {v} must be finite and nonnegative")));
            }
        }
        Ok(BudgetPair { distortion, perception })
    }

    pub fn distortion(&self) -> f64 {
        self.distortion
    }

    pub fn perception(&self) -> f64 {
        self.perception
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlaneRegion {
    /// Perception constraint inactive.
    A,
    /// Zero rate.
    B,
    /// Both constraints active.
    C,
}

impl fmt::Display for PlaneRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlaneRegion::A => "A",
            PlaneRegion::B => "B",
            PlaneRegion::C => "C",
        })
    }
}

/// Per-component operating points in the source's sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Probabilities the solver worked with (after clamping near one half).
    pub q: Vec<f64>,
    pub d: Vec<f64>,
    pub p: Vec<f64>,
    pub per_component_rate: Vec<Rate>,
    pub total_rate: Rate,
}

impl Allocation {
    pub(crate) fn build(q: Vec<f64>, d: Vec<f64>, p: Vec<f64>) -> Self {
        let per_component_rate: Vec<Rate> = q
            .iter()
            .zip(&d)
            .zip(&p)
            .map(|((&q, &d), &p)| {
                crate::scalar::scalar_rdp_at(d, p, q).expect("solver produced a valid operating point")
            })
            .collect();
        let total_rate = per_component_rate.iter().copied().sum();
        Allocation { q, d, p, per_component_rate, total_rate }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn regions(&self) -> Vec<ScalarRegion> {
        self.q
            .iter()
            .zip(&self.d)
            .zip(&self.p)
            .map(|((&q, &d), &p)| {
                crate::scalar::ScalarPoint::new(d, p, q).map(|pt| pt.region()).unwrap_or(ScalarRegion::BoundaryExterior)
            })
            .collect()
    }
}

/// Which of the three mutually exclusive optimality structures a certificate exhibits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimalityStructure {
    /// Every component in `S ∪ V`.
    PerceptionSlack,
    /// Every component in `T ∪ V`.
    ZeroRate,
    /// Every component in `U`.
    BothBinding,
}

/// Lagrange multipliers witnessing optimality of an allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    /// Distortion budget multiplier.
    pub nu: f64,
    /// Perception budget multiplier.
    pub mu: f64,
    /// Multipliers of `p_i >= 0`.
    pub lambda: Vec<f64>,
    /// Multipliers of `d_i >= 0`; zero whenever `D > 0`.
    pub gamma: Vec<f64>,
    pub component_regions: Vec<ScalarRegion>,
}

impl KktCertificate {
    /// The structure all (non-degenerate) components agree on, if any.
    /// Components with `d_i = 0` are skipped.
    pub fn structure(&self) -> Option<OptimalityStructure> {
        use ScalarRegion::*;
        let labels: Vec<ScalarRegion> =
            self.component_regions.iter().copied().filter(|&r| r != BoundaryExterior).collect();
        if labels.iter().all(|r| matches!(r, S | V)) {
            Some(OptimalityStructure::PerceptionSlack)
        } else if labels.iter().all(|r| matches!(r, T | V)) {
            Some(OptimalityStructure::ZeroRate)
        } else if labels.iter().all(|&r| r == U) {
            Some(OptimalityStructure::BothBinding)
        } else {
            None
        }
    }

    /// Checks sign and complementary slackness conditions on the multipliers.
    pub fn is_consistent(&self, allocation: &Allocation, tol: f64) -> bool {
        let slack_ok = self
            .lambda
            .iter()
            .zip(&allocation.p)
            .all(|(&l, &p)| l >= 0.0 && (l * p).abs() <= tol);
        slack_ok && self.gamma.iter().all(|&g| g == 0.0) && self.structure().is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdpResult {
    pub rate: Rate,
    pub region: PlaneRegion,
    pub allocation: Allocation,
    pub certificate: KktCertificate,
    pub multiplier_iterations: usize,
    /// `(|Σd - D|, |Σp - P|)`
    pub residuals: (f64, f64),
    /// Number of components whose probability was pulled below one half.
    pub clamped_components: usize,
}

/// Source probabilities as the solver sees them.
pub(crate) struct Working {
    pub q: Vec<f64>,
    pub clamped: usize,
}

impl Working {
    pub fn new(src: &BernoulliVectorSource) -> Self {
        let limit = 0.5 - HALF_CLAMP;
        let clamped = src.q().iter().filter(|&&q| q > limit).count();
        let q = src.q().iter().map(|&q| q.min(limit)).collect();
        Working { q, clamped }
    }

    pub fn sum_q(&self) -> f64 {
        self.q.iter().sum()
    }

    pub fn zero_rate_distortion(&self) -> f64 {
        self.q.iter().map(|&q| 2.0 * q * (1.0 - q)).sum()
    }

    /// Components with `q > 0`; the rest carry no rate and are left at zero.
    pub fn active_mask(&self) -> Vec<bool> {
        self.q.iter().map(|&q| q > 0.0).collect()
    }
}

/// Bounds on the optimal expected length, in bits, of a one-shot prefix code
/// with shared randomness achieving the budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthBounds {
    pub lower_bits: f64,
    pub upper_bits: f64,
}

/// `R ≤ L ≤ R + log2(R + 1) + 5` with `R` in bits.
pub fn length_bounds(rate: Rate) -> LengthBounds {
    let bits = rate.nats() / LN_2;
    LengthBounds { lower_bits: bits, upper_bits: bits + length_overhead(bits) }
}

/// `log2(R + 1) + 5`
pub fn length_overhead(rate_bits: f64) -> f64 {
    (rate_bits + 1.0).log2() + 5.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        let b = length_bounds(Rate::ZERO);
        assert_eq!((b.lower_bits, b.upper_bits), (0.0, 5.0));
        let b = length_bounds(Rate::from_nats(LN_2).unwrap());
        assert!((b.lower_bits - 1.0).abs() < 1e-12 && (b.upper_bits - 7.0).abs() < 1e-12);
        let b = length_bounds(Rate::from_nats(3.0 * LN_2).unwrap());
        assert!((b.lower_bits - 3.0).abs() < 1e-12 && (b.upper_bits - 10.0).abs() < 1e-12);
    }

    #[test]
    fn budget_validation() {
        assert!(BudgetPair::new(-0.1, 0.0).is_err());
        assert!(BudgetPair::new(0.1, f64::NAN).is_err());
        assert!(BudgetPair::new(0.1, f64::INFINITY).is_err());
        assert!(BudgetPair::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn structure_detection() {
        use ScalarRegion::*;
        let cert = |r: Vec<ScalarRegion>| KktCertificate {
            nu: 0.0,
            mu: 0.0,
            lambda: vec![0.0; r.len()],
            gamma: vec![0.0; r.len()],
            component_regions: r,
        };
        assert_eq!(cert(vec![S, V, S]).structure(), Some(OptimalityStructure::PerceptionSlack));
        assert_eq!(cert(vec![T, V]).structure(), Some(OptimalityStructure::ZeroRate));
        assert_eq!(cert(vec![U, U]).structure(), Some(OptimalityStructure::BothBinding));
        assert_eq!(cert(vec![U, BoundaryExterior]).structure(), Some(OptimalityStructure::BothBinding));
        assert_eq!(cert(vec![S, T]).structure(), None);
        assert_eq!(cert(vec![U, V]).structure(), None);
    }
}
