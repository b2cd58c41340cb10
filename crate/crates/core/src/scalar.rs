//! Rate-distortion-perception function of a single Bernoulli source under
//! Hamming distortion and the absolute marginal gap as perception measure,
//! together with the partition of the `(d, p)` quadrant used by the KKT
//! analysis of the vector problem.

use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::entropy::{h2_unchecked, h3_unchecked, snap_probability, PROB_TOL};
use crate::error::{RdpError, Result};

/// A rate in nats.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rate(f64);

impl Rate {
    pub const ZERO: Rate = Rate(0.0);

    /// Wraps a nonnegative finite value; tiny negative round-off is flushed to zero.
    pub fn from_nats(nats: f64) -> Result<Rate> {
        if !nats.is_finite() || nats < -1e-12 {
            return Err(RdpError::domain(format!("rate {nats} is not a finite nonnegative value")));
        }
        Ok(Rate(nats.max(0.0)))
    }

    pub(crate) fn clamped(nats: f64) -> Rate {
        Rate(nats.max(0.0))
    }

    pub fn nats(self) -> f64 {
        self.0
    }

    pub fn bits(self) -> f64 {
        self.0 / LN_2
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} nats", self.0)
    }
}

impl std::iter::Sum for Rate {
    fn sum<I: Iterator<Item = Rate>>(iter: I) -> Rate {
        Rate(iter.map(|r| r.0).sum())
    }
}

/// A per-component operating point: distortion `d`, perception gap `p` and
/// source probability `q <= 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarPoint {
    d: f64,
    p: f64,
    q: f64,
}

impl ScalarPoint {
    pub fn new(d: f64, p: f64, q: f64) -> Result<Self> {
        let q = snap_probability(q, "q")?;
        if q > 0.5 + PROB_TOL {
            return Err(RdpError::domain(format!("q = {q} exceeds 1/2")));
        }
        let d = snap_nonnegative(d, "d")?;
        let p = snap_nonnegative(p, "p")?;
        Ok(ScalarPoint { d, p, q: q.min(0.5) })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn rate(&self) -> Rate {
        scalar_rdp(self)
    }

    pub fn region(&self) -> ScalarRegion {
        scalar_region(self)
    }
}

fn snap_nonnegative(x: f64, what: &str) -> Result<f64> {
    if x.is_nan() || x < -PROB_TOL {
        return Err(RdpError::domain(format!("{what} = {x} is negative")));
    }
    Ok(x.max(0.0))
}

/// Which piece of the `(d, p)` partition a component operating point falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScalarRegion {
    /// Perception is slack and the classic rate-distortion curve applies.
    S,
    /// Zero rate.
    T,
    /// Both constraints bind.
    U,
    /// Saturated distortion `d = q` with `p >= q`.
    V,
    /// `d = 0`, outside the sets the partition is defined on.
    BoundaryExterior,
}

impl ScalarRegion {
    pub fn label(self) -> &'static str {
        match self {
            ScalarRegion::S => "S",
            ScalarRegion::T => "T",
            ScalarRegion::U => "U",
            ScalarRegion::V => "V",
            ScalarRegion::BoundaryExterior => "exterior",
        }
    }
}

impl fmt::Display for ScalarRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Distortion below which the classic rate-distortion branch applies, for `p < q`.
///
/// At `q = 1/2, p = 0` the expression is `0/0`; its limit from `p > 0` is `1/2`.
pub(crate) fn rd_threshold(p: f64, q: f64) -> f64 {
    let denom = 1.0 - 2.0 * (q - p);
    if denom <= 0.0 {
        q
    } else {
        p / denom
    }
}

/// Distortion at or above which the rate is zero, for `p <= q`.
pub(crate) fn zero_threshold(p: f64, q: f64) -> f64 {
    2.0 * q * (1.0 - q) - (1.0 - 2.0 * q) * p
}

/// Smallest perception gap compatible with the classic rate-distortion
/// channel at distortion `d < q`.
pub(crate) fn perception_floor(d: f64, q: f64) -> f64 {
    d * (1.0 - 2.0 * q) / (1.0 - 2.0 * d)
}

/// Whether `(d, p)` lies in the closure of `U`, up to a relative slack `eps`.
pub(crate) fn in_closure_of_u(d: f64, p: f64, q: f64, eps: f64) -> bool {
    let slack = eps * d.max(1.0);
    d > 0.0 && p <= q && d >= rd_threshold(p, q) - slack && d <= zero_threshold(p, q) + slack
}

/// Rate when both constraints bind: `2h2(q) + h2(q-p) - h3((d-p)/2, q) - h3((d+p)/2, 1-q)`.
pub(crate) fn joint_branch(d: f64, p: f64, q: f64) -> f64 {
    2.0 * h2_unchecked(q) + h2_unchecked(q - p)
        - h3_unchecked(((d - p) / 2.0).max(0.0), q)
        - h3_unchecked((d + p) / 2.0, 1.0 - q)
}

/// `R(d, p, q)` in nats.
pub fn scalar_rdp(point: &ScalarPoint) -> Rate {
    let ScalarPoint { d, p, q } = *point;
    if q == 0.0 {
        return Rate::ZERO;
    }
    let nats = if p >= q {
        if d < q {
            h2_unchecked(q) - h2_unchecked(d)
        } else {
            0.0
        }
    } else if d < rd_threshold(p, q) {
        h2_unchecked(q) - h2_unchecked(d)
    } else if d >= zero_threshold(p, q) {
        0.0
    } else {
        joint_branch(d, p, q)
    };
    Rate::clamped(nats)
}

/// Convenience wrapper validating the arguments.
pub fn scalar_rdp_at(d: f64, p: f64, q: f64) -> Result<Rate> {
    Ok(scalar_rdp(&ScalarPoint::new(d, p, q)?))
}

/// Labels `(d, p)` with the set of the partition that contains it.
///
/// Boundaries shared by `U` with `S` or `T` belong to `S` and `T`. At
/// `q = 1/2` the points `(1/2, p < 1/2)` belong to no set; they are labeled
/// `T`, whose closure contains them and whose rate (zero) they share.
pub fn scalar_region(point: &ScalarPoint) -> ScalarRegion {
    let ScalarPoint { d, p, q } = *point;
    if d <= 0.0 {
        return ScalarRegion::BoundaryExterior;
    }
    if d < q {
        if p >= perception_floor(d, q) {
            ScalarRegion::S
        } else {
            ScalarRegion::U
        }
    } else if d == q {
        if p >= q {
            ScalarRegion::V
        } else if q < 0.5 {
            ScalarRegion::U
        } else {
            ScalarRegion::T
        }
    } else if d >= zero_threshold(p.min(q), q) {
        ScalarRegion::T
    } else {
        ScalarRegion::U
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn r(d: f64, p: f64, q: f64) -> f64 {
        scalar_rdp_at(d, p, q).unwrap().nats()
    }

    fn region(d: f64, p: f64, q: f64) -> ScalarRegion {
        ScalarPoint::new(d, p, q).unwrap().region()
    }

    #[test]
    fn worked_values() {
        assert_eq!(r(0.25, 0.3, 0.25), 0.0);
        assert_abs_diff_eq!(r(0.0, 0.0, 0.3), h2_unchecked(0.3), epsilon = 1e-15);
        assert_eq!(r(0.45, 0.0, 0.3), 0.0);
        // p >= q: classic branch below d = q.
        assert_abs_diff_eq!(
            r(0.1, 0.5, 0.3),
            h2_unchecked(0.3) - h2_unchecked(0.1),
            epsilon = 1e-15
        );
    }

    #[test]
    fn zero_distortion_with_no_perception_slack_is_lossless() {
        for q in [0.05, 0.2, 0.3, 0.45, 0.5] {
            assert_abs_diff_eq!(r(0.0, 0.0, q), h2_unchecked(q), epsilon = 1e-14);
        }
    }

    #[test]
    fn half_source_never_needs_perception() {
        for d in [0.05, 0.2, 0.4] {
            assert_abs_diff_eq!(r(d, 0.0, 0.5), LN_2 - h2_unchecked(d), epsilon = 1e-15);
        }
    }

    #[test]
    fn regions() {
        assert_eq!(region(0.05, 0.4, 0.25), ScalarRegion::S);
        assert_eq!(region(0.25, 0.3, 0.25), ScalarRegion::V);
        assert_eq!(region(0.2, 0.01, 0.25), ScalarRegion::U);
        assert_eq!(region(0.0, 0.1, 0.25), ScalarRegion::BoundaryExterior);
        assert_eq!(region(0.4, 0.0, 0.25), ScalarRegion::T);
        assert_eq!(region(0.375, 0.0, 0.25), ScalarRegion::T);
        assert_eq!(region(0.25, 0.1, 0.25), ScalarRegion::U);
        assert_eq!(region(0.5, 0.1, 0.5), ScalarRegion::T);
        assert_eq!(region(0.1, 0.0, 0.0), ScalarRegion::T);
        // Lower boundary of U belongs to S.
        let (d, q) = (0.12, 0.3);
        assert_eq!(region(d, perception_floor(d, q), q), ScalarRegion::S);
        // Upper boundary of U belongs to T.
        let p = 0.1;
        assert_eq!(region(zero_threshold(p, q), p, q), ScalarRegion::T);
    }

    #[test]
    fn invalid_points() {
        assert!(ScalarPoint::new(0.1, 0.1, 0.6).is_err());
        assert!(ScalarPoint::new(-0.1, 0.1, 0.3).is_err());
        assert!(ScalarPoint::new(0.1, f64::NAN, 0.3).is_err());
    }

    #[test]
    fn region_label_agrees_with_branch() {
        for i in 1..60 {
            for j in 0..60 {
                let (d, p, q) = (i as f64 / 100.0, j as f64 / 100.0, 0.3);
                let rate = r(d, p, q);
                match region(d, p, q) {
                    ScalarRegion::S => {
                        assert_abs_diff_eq!(rate, h2_unchecked(q) - h2_unchecked(d), epsilon = 1e-12)
                    }
                    ScalarRegion::T | ScalarRegion::V => assert!(rate.abs() < 1e-12),
                    ScalarRegion::U => assert!(rate > 0.0),
                    ScalarRegion::BoundaryExterior => unreachable!(),
                }
            }
        }
    }

    fn qs() -> impl Strategy<Value = f64> {
        0.01f64..0.5
    }

    proptest! {
        #[test]
        fn continuous_across_branch_boundaries(q in qs(), frac in 0.0f64..0.999) {
            let p = q * frac;
            let eps = 1e-8;
            let lo = rd_threshold(p, q);
            let hi = zero_threshold(p, q);
            prop_assert!((r(lo - eps, p, q) - r(lo + eps, p, q)).abs() <= 1e-6);
            prop_assert!((r(hi - eps, p, q) - r(hi + eps, p, q)).abs() <= 1e-6);
            let p_big = q + frac;
            prop_assert!((r(q - eps, p_big, q) - r(q + eps, p_big, q)).abs() <= 1e-6);
        }

        #[test]
        fn non_increasing(q in qs(), d in 0.0f64..0.6, p in 0.0f64..0.6, eps in 1e-6f64..0.05) {
            prop_assert!(r(d + eps, p, q) <= r(d, p, q) + 1e-13);
            prop_assert!(r(d, p + eps, q) <= r(d, p, q) + 1e-13);
        }

        #[test]
        fn midpoint_convex(q in qs(), d1 in 0.0f64..0.6, p1 in 0.0f64..0.6,
                           d2 in 0.0f64..0.6, p2 in 0.0f64..0.6) {
            let mid = r((d1 + d2) / 2.0, (p1 + p2) / 2.0, q);
            prop_assert!(mid <= (r(d1, p1, q) + r(d2, p2, q)) / 2.0 + 1e-10);
        }

        #[test]
        fn degenerate_source_has_zero_rate(d in 0.0f64..2.0, p in 0.0f64..2.0) {
            prop_assert_eq!(r(d, p, 0.0), 0.0);
        }

        #[test]
        fn regions_cover_positive_quadrant(q in 0.0f64..=0.5, d in 1e-9f64..1.0, p in 0.0f64..1.0) {
            prop_assert_ne!(region(d, p, q), ScalarRegion::BoundaryExterior);
        }
    }
}
