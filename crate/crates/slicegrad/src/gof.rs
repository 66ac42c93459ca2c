//! Histogram goodness-of-fit machinery: chi-square tests against a CDF and
//! the two-sample Kolmogorov-Smirnov test.

use crate::error::{Error, Result};
use crate::specfn;

/// One bin of a conformance histogram.
#[derive(Debug, Clone)]
pub struct HistBin {
    pub center: f64,
    pub width: f64,
    /// Empirical density: count / (n * width).
    pub empirical_density: f64,
    /// Analytic density evaluated at the bin center.
    pub analytic_pdf: f64,
}

/// Result of a chi-square goodness-of-fit test.
#[derive(Debug, Clone)]
pub struct ChiSquareFit {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Chi-square statistic of observed counts against expected probabilities.
///
/// Bins with expected count below 5 are merged into their neighbor toward
/// the center so the asymptotic chi-square distribution applies.
pub fn chi_square_gof(observed: &[u64], expected_prob: &[f64], n: u64) -> Result<ChiSquareFit> {
    if observed.len() != expected_prob.len() {
        return Err(Error::LengthMismatch {
            expected: observed.len(),
            got: expected_prob.len(),
        });
    }
    if observed.len() < 2 {
        return Err(Error::Config("need at least two bins".into()));
    }
    // Merge from both ends toward the middle until every kept bin has an
    // expected count of at least 5.
    let mut obs: Vec<f64> = observed.iter().map(|&c| c as f64).collect();
    let mut exp: Vec<f64> = expected_prob.iter().map(|&p| p * n as f64).collect();
    let merge_threshold = 5.0;
    // forward pass
    let mut merged_obs: Vec<f64> = Vec::with_capacity(obs.len());
    let mut merged_exp: Vec<f64> = Vec::with_capacity(exp.len());
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for i in 0..obs.len() {
        acc_o += obs[i];
        acc_e += exp[i];
        if acc_e >= merge_threshold {
            merged_obs.push(acc_o);
            merged_exp.push(acc_e);
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 || acc_o > 0.0 {
        if let (Some(o), Some(e)) = (merged_obs.last_mut(), merged_exp.last_mut()) {
            *o += acc_o;
            *e += acc_e;
        } else {
            merged_obs.push(acc_o);
            merged_exp.push(acc_e);
        }
    }
    obs = merged_obs;
    exp = merged_exp;
    if obs.len() < 2 {
        return Err(Error::Degenerate(
            "all probability mass merged into one bin".into(),
        ));
    }

    let statistic: f64 = obs
        .iter()
        .zip(exp.iter())
        .map(|(&o, &e)| {
            let d = o - e;
            d * d / e
        })
        .sum();
    let dof = obs.len() - 1;
    let p_value = 1.0 - specfn::reg_lower_gamma(0.5 * dof as f64, 0.5 * statistic)?;
    Ok(ChiSquareFit {
        statistic,
        dof,
        p_value,
    })
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() < 8 || b.len() < 8 {
        return Err(Error::Config("KS test needs at least 8 samples each".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    if xs.iter().chain(ys.iter()).any(|v| v.is_nan()) {
        return Err(Error::Domain("KS samples must not contain NaN".into()));
    }
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = xs[i];
        let y = ys[j];
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(diff);
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok((d, ks_q(lambda)))
}

/// Kolmogorov survival function `Q(lambda) = 2 sum (-1)^(j-1) exp(-2 j^2 lambda^2)`.
fn ks_q(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let t = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * t;
        if t < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
