//! Analytic accuracy and variance curves of the truncated-ratio family, and
//! the offset-selection guideline.
//!
//! With `sigma = 1`, let `m(c) = N(c) / (1 - Phi(c))` be the Mills-ratio
//! reciprocal of the unit normal. The second moment of the truncating
//! variate is `E[eps_c^2] = 1 + c m(c)`, yielding
//!
//! - sampling-variance inflation `v(c) = 1 + c m(c) - c^2`, rising from 1
//!   to 2 (the second moment of the B-distribution), and
//! - gradient-accuracy gain `t(c) = 1 / Var[(dp/dmu)/q]
//!   = exp(-c^2) / (4 (1 - Phi(c))^2 (1 + c m(c)))`, rising from 1 to
//!   `pi/2`.
//!
//! Everything is evaluated through the scaled survival function
//! `exp(c^2/2) (1 - Phi(c))`, so no intermediate quantity underflows no
//! matter how large `c` gets.

use crate::error::{Error, Result};
use crate::specfn;

/// One row of the offset-selection guideline: applying the truncated-ratio
/// estimator with offset `c` pays off up to roughly `dim_minus_one`
/// problem dimensions and buys a factor `accuracy_t` of gradient accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CGuidelineRow {
    pub c: f64,
    /// `1 / (v(c)/t(c) - 1)`, unrounded.
    pub dim_minus_one: f64,
    /// `t(c)`.
    pub accuracy_t: f64,
}

#[inline]
fn mills(c: f64) -> f64 {
    // N(c) / (1 - Phi(c)) without underflow.
    1.0 / (specfn::SQRT_2PI * specfn::std_normal_sf_scaled(c))
}

/// Second moment `E[eps_c^2]` of the unit normal truncated to `[c, inf)`.
#[inline]
fn trunc_second_moment(c: f64) -> f64 {
    1.0 + c * mills(c)
}

/// Gradient-accuracy gain `t(c)`: the factor by which the truncated-ratio
/// weight variance beats the plain score's. `t(0) = 1`; increases
/// monotonically toward `pi/2`.
pub fn accuracy_t(c: f64) -> f64 {
    let s = specfn::std_normal_sf_scaled(c);
    1.0 / (4.0 * s * s * trunc_second_moment(c))
}

/// Sampling-variance inflation `v(c)` in units of `sigma^2`. `v(0) = 1`;
/// increases monotonically toward 2.
pub fn variance_scale_v(c: f64) -> f64 {
    trunc_second_moment(c) - c * c
}

/// Offset suggested for a `dim`-dimensional problem: the root of
/// `(v(c)/t(c) - 1)(dim - 1) = 1`, located by bisection on [0, 10].
///
/// The left side is monotone in `c` and zero at `c = 0`. For very small
/// dimensions it never reaches 1 on the bracket (the variance penalty can
/// no longer bind), in which case the upper end of the bracket is returned.
pub fn suggest_c(dim: usize) -> Result<f64> {
    if dim < 2 {
        return Err(Error::Config(format!(
            "offset guideline requires dim >= 2, got {dim}"
        )));
    }
    let target = |c: f64| (variance_scale_v(c) / accuracy_t(c) - 1.0) * (dim as f64 - 1.0) - 1.0;
    let (mut lo, mut hi) = (0.0_f64, 10.0_f64);
    if target(hi) < 0.0 {
        return Ok(hi);
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if target(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The guideline table at the canonical offsets
/// `c in {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0}`.
pub fn guideline_table() -> Vec<CGuidelineRow> {
    [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0]
        .iter()
        .map(|&c| CGuidelineRow {
            c,
            dim_minus_one: 1.0 / (variance_scale_v(c) / accuracy_t(c) - 1.0),
            accuracy_t: accuracy_t(c),
        })
        .collect()
}
