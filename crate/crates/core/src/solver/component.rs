//! Per-component stationarity system for the region where both budgets bind.
//!
//! With `a = (d+p)/2` and `b = (d-p)/2` (the two crossover probabilities of
//! the test channel), the distortion multiplier equation reads
//! `a b = e^{-2α} (1-q-b)(q-a)`. For fixed `p` this is a quadratic in `b`
//! with exactly one positive root, so `d` is eliminated in closed form and
//! the perception multiplier equation becomes a monotone scalar equation in
//! `p`, solved by a bracketed search.

use crate::error::{RdpError, Result};
use crate::roots::{brent, RootOptions};
use crate::scalar::{rd_threshold, zero_threshold};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentSolution {
    pub d: f64,
    pub p: f64,
    /// Multiplier of `p >= 0`; positive only when `p = 0`.
    pub lambda: f64,
    pub iterations: usize,
}

/// Distortion multiplier `α` in the form the quadratic needs.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AlphaTerms {
    alpha: f64,
    /// `e^{-2α}`
    a: f64,
    /// `1 - e^{-2α}`, computed without cancellation.
    one_minus_a: f64,
}

impl AlphaTerms {
    pub(crate) fn new(alpha: f64) -> Self {
        AlphaTerms { alpha, a: (-2.0 * alpha).exp(), one_minus_a: -(-2.0 * alpha).exp_m1() }
    }
}

/// Positive root `b` of `(1-A) b² + (p + A(1-p)) b - A(1-q)(q-p) = 0`.
#[inline]
pub(crate) fn half_gap(t: &AlphaTerms, p: f64, q: f64) -> f64 {
    let c = t.a * (1.0 - q) * (q - p);
    if c <= 0.0 {
        return 0.0;
    }
    let lin = p + t.a * (1.0 - p);
    2.0 * c / (lin + (lin * lin + 4.0 * t.one_minus_a * c).sqrt())
}

/// Value of `β` at which `(2b + p, p)` is stationary, i.e. minus the partial
/// derivative of the rate in `p` along the `α`-curve.
#[inline]
pub(crate) fn beta_on_curve(t: &AlphaTerms, b: f64, p: f64, q: f64) -> f64 {
    // The ratio inside the logarithm simplifies using a b = A(1-q-b)(q-a).
    t.alpha + ((1.0 - q + p) * b / ((q - p) * (1.0 - q - b))).ln()
}

#[inline]
fn inside_u(d: f64, p: f64, q: f64) -> bool {
    p < q && d > rd_threshold(p, q) && d < zero_threshold(p, q)
}

/// Solves the stationarity system for one component at multipliers `(α, β)`.
///
/// Returns the point of the closure of `U` minimizing
/// `R(d, p, q) + α d + β p`; when the unconstrained solution would need a
/// negative `p`, the component sits at `p = 0` with `d` from the closed-form
/// `p = 0` specialization and a positive `λ`.
pub fn solve_component_c(alpha: f64, beta: f64, q: f64) -> Result<ComponentSolution> {
    if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
        return Err(RdpError::domain(format!(
            "multipliers must be positive and finite, got alpha = {alpha}, beta = {beta}"
        )));
    }
    if !(q > 0.0 && q <= 0.5) {
        return Err(RdpError::domain(format!("q = {q} is not in (0, 1/2]")));
    }
    // U is empty at exactly one half; work just inside it.
    let q = q.min(0.5 - super::HALF_CLAMP);
    component_point(alpha, beta, q, 200)
}

pub(crate) fn component_point(alpha: f64, beta: f64, q: f64, max_iter: usize) -> Result<ComponentSolution> {
    let t = AlphaTerms::new(alpha);
    let b0 = half_gap(&t, 0.0, q);
    let beta0 = beta_on_curve(&t, b0, 0.0, q);
    if beta >= beta0 || b0 == 0.0 {
        return Ok(ComponentSolution { d: 2.0 * b0, p: 0.0, lambda: (beta - beta0).max(0.0), iterations: 0 });
    }
    // Leaving U means p overshot the root.
    let residual = |p: f64| {
        if p == 0.0 {
            return beta0 - beta;
        }
        let b = half_gap(&t, p, q);
        if inside_u(2.0 * b + p, p, q) {
            beta_on_curve(&t, b, p, q) - beta
        } else {
            -1.0
        }
    };
    let opts = RootOptions { xtol: 1e-17, ftol: 0.0, max_iter };
    let root = brent(residual, 0.0, q, opts, "component perception multiplier")?;
    let mut p = root.x;
    if residual(p) < 0.0 && !inside_u(2.0 * half_gap(&t, p, q) + p, p, q) {
        // No stationary point inside U: the curve leaves U first. Take the
        // last point before the exit.
        let (mut lo, mut hi) = (0.0, p);
        while hi - lo > f64::EPSILON * hi {
            let mid = 0.5 * (lo + hi);
            if residual(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        p = lo;
    }
    let b = half_gap(&t, p, q);
    Ok(ComponentSolution { d: 2.0 * b + p, p, lambda: 0.0, iterations: root.iterations })
}

/// `p = 0` specialization: `d'' = (√(1 + 4q(1-q)(e^{2α}-1)) - 1) / (e^{2α}-1)`,
/// written in a form that stays accurate as `α → 0`.
pub fn zero_perception_distortion(alpha: f64, q: f64) -> f64 {
    let c = 4.0 * q * (1.0 - q);
    let e = (2.0 * alpha).exp_m1();
    if !e.is_finite() {
        return 0.0;
    }
    c / ((1.0 + c * e).sqrt() + 1.0)
}
