//! Binary and ternary entropy in nats.

use crate::error::{RdpError, Result};

/// Slack allowed on probability arguments before they are rejected.
pub const PROB_TOL: f64 = 1e-12;

/// `x ln x` with the convention `0 ln 0 = 0`.
#[inline]
pub fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Checks that `u` is a probability up to [`PROB_TOL`] and snaps it into `[0, 1]`.
pub(crate) fn snap_probability(u: f64, what: &str) -> Result<f64> {
    if !u.is_finite() || !(-PROB_TOL..=1.0 + PROB_TOL).contains(&u) {
        return Err(RdpError::domain(format!("{what} = {u} is not in [0, 1]")));
    }
    Ok(u.clamp(0.0, 1.0))
}

/// Binary entropy `-u ln u - (1-u) ln(1-u)`.
pub fn h2(u: f64) -> Result<f64> {
    let u = snap_probability(u, "h2 argument")?;
    Ok(h2_unchecked(u))
}

/// Ternary entropy of the probability vector `(u, v, 1-u-v)`.
pub fn h3(u: f64, v: f64) -> Result<f64> {
    let u = snap_probability(u, "h3 first argument")?;
    let v = snap_probability(v, "h3 second argument")?;
    let w = 1.0 - u - v;
    if w < -PROB_TOL {
        return Err(RdpError::domain(format!(
            "h3 arguments ({u}, {v}) sum to more than 1"
        )));
    }
    Ok(-(xlnx(u) + xlnx(v) + xlnx(w.max(0.0))))
}

#[inline]
pub(crate) fn h2_unchecked(u: f64) -> f64 {
    -(xlnx(u) + xlnx(1.0 - u))
}

#[inline]
pub(crate) fn h3_unchecked(u: f64, v: f64) -> f64 {
    -(xlnx(u) + xlnx(v) + xlnx((1.0 - u - v).max(0.0)))
}
