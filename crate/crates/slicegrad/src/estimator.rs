//! Gradient estimators for `d/dtheta E_{x ~ p(x; theta)}[phi(x)]`.
//!
//! The likelihood-ratio estimator weights function values by the score
//! `d log p / d theta`; importance-sampled variants draw from a different
//! distribution `q` and weight by `(dp/dtheta) / q` instead. The slice-ratio
//! family uses the optimal `q proportional to |dp/dtheta|`, which for a
//! Gaussian mean-gradient is the B-distribution and yields a weight of
//! constant magnitude `2 / (sigma sqrt(2 pi))`.
//!
//! In more than one dimension the exact importance weight picks up a factor
//! `prod_{j != i} p_j / q_j` whose variance grows exponentially with the
//! dimension, so by default each dimension keeps only its own weight and the
//! cross factors are replaced by their expectation of one (the
//! "per-dimension scheme"). This is unbiased for additive and for quadratic
//! objectives because every sampling distribution here is symmetric about
//! its mean.
//!
//! Antithetic pairing draws reflected sample pairs that share one pair of
//! `phi` evaluations across all parameter dimensions. For the mean-gradient
//! kinds the paired weights are exact bitwise negations of each other, so
//! the per-pair weight sum is exactly zero and any constant baseline drops
//! out of the estimate bit-for-bit.

use crate::dist::{
    b_radius, beta_slice_unit_offset, chi_radius, l_radius, trunc_ratio_radius, unit_sphere_sample,
    w_radius, GaussianParams,
};
use crate::error::{Error, Result};
use crate::rng::{random_sign, standard_normal, uniform_open01};
use crate::specfn::{self, Branch, SQRT_2PI};
use rand::Rng;
use std::fmt;

/// Which gradient estimator to run.
///
/// Mean-gradient kinds: `GlrMu`, `Blr`, `Slrg`, `Trrg`, `Brg`, `Lrg`,
/// `Drg`, `Dlrg`, `Rp`. Scale-gradient kinds: `GlrSigma`, `Wrg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    /// Likelihood-ratio gradient w.r.t. the mean of a Gaussian.
    GlrMu,
    /// Likelihood-ratio gradient w.r.t. the scale of a Gaussian.
    GlrSigma,
    /// Likelihood-ratio gradient w.r.t. the mean of a symmetric Beta.
    Blr { alpha: f64 },
    /// Reparameterization (pathwise) gradient; requires `d phi / d x`.
    Rp,
    /// Slice-ratio gradient: Gaussian mean-gradient sampled from the
    /// B-distribution.
    Slrg,
    /// Gaussian scale-gradient sampled from the W-distribution.
    Wrg,
    /// Gaussian mean-gradient sampled from the L-distribution.
    Lrg,
    /// Truncated-ratio gradient with offset `c`.
    Trrg { c: f64 },
    /// Beta slice-ratio gradient with shape `alpha`.
    Brg { alpha: f64 },
    /// Directional ratio gradient (chi radius with D+1 degrees of freedom).
    Drg,
    /// Directional ratio gradient assuming locally linear `phi`
    /// (chi radius with D+2 degrees of freedom).
    Dlrg,
}

impl EstimatorKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            EstimatorKind::Trrg { c } if !(*c >= 0.0) => {
                Err(Error::Domain(format!("trrg offset must be >= 0, got {c}")))
            }
            EstimatorKind::Brg { alpha } | EstimatorKind::Blr { alpha } if !(*alpha > 1.0) => {
                Err(Error::Domain(format!("alpha must exceed 1, got {alpha}")))
            }
            _ => Ok(()),
        }
    }

    /// True for estimators of the scale gradient `d/d sigma`.
    pub fn is_sigma(&self) -> bool {
        matches!(self, EstimatorKind::GlrSigma | EstimatorKind::Wrg)
    }

    /// True for the importance-sampled kinds whose multidimensional form
    /// uses the per-dimension scheme.
    pub fn is_slice_ratio(&self) -> bool {
        matches!(
            self,
            EstimatorKind::Slrg
                | EstimatorKind::Wrg
                | EstimatorKind::Lrg
                | EstimatorKind::Trrg { .. }
                | EstimatorKind::Brg { .. }
        )
    }

    /// True for the joint directional estimators.
    pub fn is_directional(&self) -> bool {
        matches!(self, EstimatorKind::Drg | EstimatorKind::Dlrg)
    }

    /// Parse a CLI spelling such as `glr`, `slrg`, `trrg:0.5`, `brg:1.5`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let parse_arg = |what: &str| -> Result<f64> {
            let raw = arg.ok_or_else(|| {
                Error::Parse(format!("estimator `{name}` requires a parameter, e.g. `{name}:{what}`"))
            })?;
            raw.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad numeric parameter `{raw}` in `{s}`")))
        };
        let kind = match name.to_ascii_lowercase().as_str() {
            "glr" => EstimatorKind::GlrMu,
            "glr-sigma" | "slr" => EstimatorKind::GlrSigma,
            "blr" => EstimatorKind::Blr { alpha: parse_arg("1.5")? },
            "rp" => EstimatorKind::Rp,
            "slrg" => EstimatorKind::Slrg,
            "wrg" => EstimatorKind::Wrg,
            "lrg" => EstimatorKind::Lrg,
            "trrg" => EstimatorKind::Trrg { c: parse_arg("0.5")? },
            "brg" => EstimatorKind::Brg { alpha: parse_arg("1.5")? },
            "drg" => EstimatorKind::Drg,
            "dlrg" => EstimatorKind::Dlrg,
            other => return Err(Error::Parse(format!("unknown estimator `{other}`"))),
        };
        if kind.takes_param() != arg.is_some() {
            return Err(Error::Parse(format!(
                "estimator `{name}` {} a parameter",
                if kind.takes_param() { "requires" } else { "does not take" }
            )));
        }
        kind.validate()?;
        Ok(kind)
    }

    fn takes_param(&self) -> bool {
        matches!(
            self,
            EstimatorKind::Blr { .. } | EstimatorKind::Trrg { .. } | EstimatorKind::Brg { .. }
        )
    }

    /// Parse a comma-separated estimator list.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(Self::parse)
            .collect()
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorKind::GlrMu => write!(f, "glr"),
            EstimatorKind::GlrSigma => write!(f, "glr-sigma"),
            EstimatorKind::Blr { alpha } => write!(f, "blr:{alpha}"),
            EstimatorKind::Rp => write!(f, "rp"),
            EstimatorKind::Slrg => write!(f, "slrg"),
            EstimatorKind::Wrg => write!(f, "wrg"),
            EstimatorKind::Lrg => write!(f, "lrg"),
            EstimatorKind::Trrg { c } => write!(f, "trrg:{c}"),
            EstimatorKind::Brg { alpha } => write!(f, "brg:{alpha}"),
            EstimatorKind::Drg => write!(f, "drg"),
            EstimatorKind::Dlrg => write!(f, "dlrg"),
        }
    }
}

/// Mean vector and shared (spherical) scale of the base distribution.
///
/// Gaussian kinds interpret this directly; Beta kinds match the variance by
/// stretching the unit-interval shape with `k = 2 sigma sqrt(2 alpha + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseParams {
    pub mu: Vec<f64>,
    pub sigma: f64,
}

impl BaseParams {
    pub fn new(mu: Vec<f64>, sigma: f64) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { mu, sigma })
    }

    /// Zero-mean parameters of the given dimension.
    pub fn centered(dim: usize, sigma: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], sigma)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Baseline subtracted from `phi` before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Baseline {
    /// No baseline. With antithetic pairing this is already optimal for the
    /// mean-gradient kinds, whose paired weights cancel exactly.
    #[default]
    None,
    /// The batch mean of `phi`.
    PlainMean,
    /// The variance-optimal constant `E[w^2 phi] / E[w^2]`, per dimension.
    Optimal,
}

/// Knobs of [`estimate_gradient`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOpts {
    /// Consume samples in reflected pairs sharing one pair of `phi` values.
    pub antithetic: bool,
    /// Keep only each dimension's own importance weight (drop the
    /// cross-dimension `p/q` factors). Turning this off restores the exact
    /// factorized weight, whose variance explodes with dimension.
    pub per_dim_weights: bool,
    pub baseline: Baseline,
}

impl EstimateOpts {
    /// Defaults for a kind: antithetic pairing with the per-dimension
    /// scheme. The scale LR gradient gets a plain-mean baseline because its
    /// paired weights are equal rather than opposite, so pairing alone
    /// cancels nothing.
    pub fn for_kind(kind: &EstimatorKind) -> Self {
        EstimateOpts {
            antithetic: true,
            per_dim_weights: true,
            baseline: if matches!(kind, EstimatorKind::GlrSigma) {
                Baseline::PlainMean
            } else {
                Baseline::None
            },
        }
    }
}

/// A vector gradient estimate with its sample count and the summed-variance
/// statistic: the sum over coordinates of the estimated variance of the
/// estimate itself (per-draw scatter divided by the number of draws).
#[derive(Debug, Clone)]
pub struct GradientEstimate {
    pub grad: Vec<f64>,
    pub n_samples: usize,
    pub summed_variance: f64,
}

/// Objective oracle: a function value, optionally with its gradient
/// (the reparameterization estimator is the only consumer of the latter).
/// Implementations may consume internal noise streams; estimators call
/// `value` in a deterministic order.
pub trait PhiOracle {
    fn value(&mut self, x: &[f64]) -> f64;
    fn grad(&mut self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Wrap a plain closure as a [`PhiOracle`] without gradient.
pub struct FnPhi<F: FnMut(&[f64]) -> f64>(pub F);

impl<F: FnMut(&[f64]) -> f64> PhiOracle for FnPhi<F> {
    fn value(&mut self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

/// Wrap a value closure and a gradient closure.
pub struct FnPhiGrad<F, G>(pub F, pub G)
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>;

impl<F, G> PhiOracle for FnPhiGrad<F, G>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    fn value(&mut self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
    fn grad(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        Some((self.1)(x))
    }
}

// ---------------------------------------------------------------------------
// Score weights and importance weights
// ---------------------------------------------------------------------------

/// `d log N(x; mu, sigma) / d mu = (x - mu) / sigma^2`.
#[inline]
pub fn score_weight_gaussian_mu(x: f64, p: &GaussianParams) -> f64 {
    (x - p.mu) / (p.sigma * p.sigma)
}

/// `d log N(x; mu, sigma) / d sigma = ((x - mu)^2 / sigma^2 - 1) / sigma`.
#[inline]
pub fn score_weight_gaussian_sigma(x: f64, p: &GaussianParams) -> f64 {
    let z = (x - p.mu) / p.sigma;
    (z * z - 1.0) / p.sigma
}

/// Mean-shift score of a stretched symmetric Beta in terms of the centered
/// unit-interval variate `eps_beta = x_unit - 1/2`:
/// `2 eps (alpha - 1) / ((1/4 - eps^2) k)`.
///
/// The pole at `|eps| -> 1/2` is the pathology that motivates importance
/// sampling: as `alpha` drops toward 1 the weight variance diverges.
pub fn score_weight_beta_mu(eps_beta: f64, alpha: f64, k: f64) -> Result<f64> {
    if !(eps_beta.abs() < 0.5) {
        return Err(Error::Domain(format!(
            "eps_beta must lie strictly inside (-1/2, 1/2), got {eps_beta}"
        )));
    }
    if !(alpha > 1.0) {
        return Err(Error::Domain(format!("alpha must exceed 1, got {alpha}")));
    }
    if !(k > 0.0) {
        return Err(Error::Domain(format!("stretch k must be positive, got {k}")));
    }
    Ok(2.0 * eps_beta * (alpha - 1.0) / ((0.25 - eps_beta * eps_beta) * k))
}

/// Sampler byproducts needed to evaluate an importance weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplerAux {
    None,
    /// The truncated-normal variate behind a TRRG draw.
    EpsC(f64),
    /// The height uniform and normal behind an L-distribution draw.
    HeightNormal { eps_h: f64, eps_x: f64 },
    /// The chi radius and dimension behind a directional draw.
    ChiRadius { z: f64, dim: usize },
}

/// The importance-sampled weight `(dp/dtheta) / q(x)` of the slice-ratio
/// estimators, for one coordinate `x` drawn from the matching `q`.
pub fn is_weight(
    kind: &EstimatorKind,
    x: f64,
    mu: f64,
    sigma: f64,
    aux: &SamplerAux,
) -> Result<f64> {
    kind.validate()?;
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let sgn = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
    match (kind, aux) {
        // 2 / (sigma sqrt(2 pi)), written so it rounds to the same double
        // as the directional-estimator constant at D = 1.
        (EstimatorKind::Slrg, _) => Ok(sgn(x - mu) * (2.0 / std::f64::consts::PI).sqrt() / sigma),
        (EstimatorKind::Brg { alpha }, _) => {
            let k = 2.0 * sigma * (2.0 * alpha + 1.0).sqrt();
            let ln_b = specfn::log_beta(*alpha, *alpha)?;
            Ok(sgn(x - mu) * 2.0 * 0.25f64.powf(alpha - 1.0) / (ln_b.exp() * k))
        }
        (EstimatorKind::Trrg { c }, SamplerAux::EpsC(eps_c)) => {
            if *eps_c < *c {
                return Err(Error::Domain(format!(
                    "eps_c = {eps_c} is below the truncation offset c = {c}"
                )));
            }
            Ok(sgn(x - mu) * (2.0 * eps_c / sigma) * specfn::std_normal_sf_scaled(*c))
        }
        (EstimatorKind::Trrg { .. }, _) => Err(Error::Domain(
            "trrg weight requires the eps_c sampler auxiliary".into(),
        )),
        (EstimatorKind::Wrg, _) => {
            let z2 = ((x - mu) / sigma).powi(2);
            let c = 2.0 * std::f64::consts::SQRT_2
                / (sigma * (std::f64::consts::E * std::f64::consts::PI).sqrt());
            Ok(sgn(z2 - 1.0) * c)
        }
        (EstimatorKind::Lrg, SamplerAux::HeightNormal { eps_h, eps_x }) => {
            if !(*eps_h > 0.0 && *eps_h <= 1.0) {
                return Err(Error::Domain(format!("eps_h must lie in (0,1], got {eps_h}")));
            }
            let denom = sigma * (-2.0 * eps_h.ln() + eps_x * eps_x).sqrt();
            Ok(sgn(x - mu) / denom)
        }
        (EstimatorKind::Lrg, _) => Err(Error::Domain(
            "lrg weight requires the (eps_h, eps_x) sampler auxiliaries".into(),
        )),
        (EstimatorKind::Drg, SamplerAux::ChiRadius { z, dim }) => {
            // r_hat_i = (x_i - mu_i) / (sigma z)
            Ok(gamma_half_ratio_sqrt2(*dim) * (x - mu) / (sigma * sigma * z))
        }
        (EstimatorKind::Dlrg, SamplerAux::ChiRadius { z, dim }) => {
            Ok(*dim as f64 * (x - mu) / (sigma * sigma * z * z))
        }
        (EstimatorKind::Drg | EstimatorKind::Dlrg, _) => Err(Error::Domain(
            "directional weights require the chi-radius auxiliary".into(),
        )),
        (other, _) => Err(Error::Config(format!(
            "`{other}` is not an importance-sampled estimator"
        ))),
    }
}

/// `sqrt(2) * Gamma((d+1)/2) / Gamma(d/2)` by the half-integer recurrence
/// `ratio(d+1) = (d/2) / ratio(d)` from `ratio(1) = 1/sqrt(pi)`.
///
/// This is the constant weight magnitude (times `1/sigma`) of the
/// directional ratio gradient; at `d = 1` it reduces to the slice-ratio
/// constant `2 / sqrt(2 pi)`.
pub fn gamma_half_ratio_sqrt2(d: usize) -> f64 {
    let mut ratio = 1.0 / std::f64::consts::PI.sqrt();
    for k in 1..d {
        ratio = 0.5 * k as f64 / ratio;
    }
    std::f64::consts::SQRT_2 * ratio
}

/// Reflect `x` about `center`: `2 center - x`, an involution.
pub fn antithetic_reflect(x: &[f64], center: &[f64]) -> Result<Vec<f64>> {
    if x.len() != center.len() {
        return Err(Error::LengthMismatch {
            expected: center.len(),
            got: x.len(),
        });
    }
    Ok(x.iter()
        .zip(center.iter())
        .map(|(xi, ci)| 2.0 * ci - xi)
        .collect())
}

/// The variance-optimal constant baseline `sum w^2 phi / sum w^2`.
///
/// For constant-magnitude weights (the slice-ratio case) this reduces to
/// the plain mean of `phi`.
pub fn optimal_baseline(weights: &[f64], phis: &[f64]) -> Result<f64> {
    if weights.len() != phis.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            got: phis.len(),
        });
    }
    if weights.is_empty() {
        return Err(Error::Degenerate("empty weight vector".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&w, &p) in weights.iter().zip(phis.iter()) {
        num += w * w * p;
        den += w * w;
    }
    if den == 0.0 {
        return Err(Error::Degenerate("all weights are zero".into()));
    }
    Ok(num / den)
}

/// Slice-ratio weight for an arbitrary distribution: `sgn(dp/dmu) * H`,
/// where `H` is the total projected height length of the pdf (twice the
/// peak density for a unimodal pdf).
pub fn general_slice_weight(dpdmu_nonneg: bool, h: f64) -> Result<f64> {
    if !h.is_finite() || !(h > 0.0) {
        return Err(Error::Domain(format!(
            "projected height length must be finite and positive, got {h}"
        )));
    }
    Ok(if dpdmu_nonneg { h } else { -h })
}

// ---------------------------------------------------------------------------
// Sample drawing
// ---------------------------------------------------------------------------

/// Per-kind precomputed constants.
struct KindConsts {
    sigma: f64,
    /// Stretch of the Beta kinds.
    k: f64,
    /// Constant weight magnitude (SLRG, BRG, WRG, DRG) or scale factor
    /// (TRRG).
    weight_const: f64,
    /// `B(alpha, alpha)` for the Beta kinds.
    beta_fn: f64,
}

impl KindConsts {
    fn new(kind: &EstimatorKind, params: &BaseParams) -> Result<Self> {
        let sigma = params.sigma;
        let dim = params.dim();
        let mut k = 0.0;
        let mut weight_const = 0.0;
        let mut beta_fn = 0.0;
        match kind {
            EstimatorKind::Slrg => weight_const = (2.0 / std::f64::consts::PI).sqrt() / sigma,
            EstimatorKind::Wrg => {
                weight_const = 2.0 * std::f64::consts::SQRT_2
                    / (sigma * (std::f64::consts::E * std::f64::consts::PI).sqrt());
            }
            EstimatorKind::Trrg { c } => {
                // (1 - Phi(c)) / exp(-c^2/2), finite for any offset.
                weight_const = specfn::std_normal_sf_scaled(*c) * 2.0 / sigma;
            }
            EstimatorKind::Brg { alpha } | EstimatorKind::Blr { alpha } => {
                k = 2.0 * sigma * (2.0 * alpha + 1.0).sqrt();
                beta_fn = specfn::log_beta(*alpha, *alpha)?.exp();
                weight_const = 2.0 * 0.25f64.powf(alpha - 1.0) / (beta_fn * k);
            }
            EstimatorKind::Drg => weight_const = gamma_half_ratio_sqrt2(dim) / sigma,
            _ => {}
        }
        Ok(KindConsts {
            sigma,
            k,
            weight_const,
            beta_fn,
        })
    }
}

/// One antithetic pair of sample points with their per-dimension weights.
///
/// `x_b`/`w_b` hold the reflected partner; for the mean-gradient kinds
/// `w_b[i]` is the exact bitwise negation of `w_a[i]`.
#[derive(Debug, Clone)]
pub struct PairDraw {
    pub x_a: Vec<f64>,
    pub x_b: Vec<f64>,
    pub w_a: Vec<f64>,
    pub w_b: Vec<f64>,
    /// Log of the full factorized importance ratio `prod_j p_j/q_j` at each
    /// point; zero unless the kind importance-samples.
    log_ratio_a: f64,
    log_ratio_b: f64,
    /// Per-dimension log ratios, needed to exclude dimension i's own factor.
    dim_log_ratio_a: Vec<f64>,
    dim_log_ratio_b: Vec<f64>,
}

/// Draw one antithetic pair for `kind`.
///
/// Consumes exactly the same stream tuple regardless of whether the caller
/// later uses one or both points, so antithetic and plain estimation stay
/// stream-compatible per draw.
pub fn draw_pair<R: Rng + ?Sized>(
    kind: &EstimatorKind,
    params: &BaseParams,
    rng: &mut R,
) -> Result<PairDraw> {
    let consts = KindConsts::new(kind, params)?;
    draw_pair_inner(kind, params, &consts, rng, false)
}

fn draw_pair_inner<R: Rng + ?Sized>(
    kind: &EstimatorKind,
    params: &BaseParams,
    consts: &KindConsts,
    rng: &mut R,
    want_ratio: bool,
) -> Result<PairDraw> {
    let dim = params.dim();
    if kind.is_directional() {
        return draw_directional_pair(kind, params, consts, rng);
    }
    let mut x_a = vec![0.0; dim];
    let mut x_b = vec![0.0; dim];
    let mut w_a = vec![0.0; dim];
    let mut w_b = vec![0.0; dim];
    let mut dim_log_ratio_a = Vec::new();
    let mut dim_log_ratio_b = Vec::new();
    let track_ratio = kind.is_slice_ratio() && want_ratio;
    if track_ratio {
        dim_log_ratio_a = vec![0.0; dim];
        dim_log_ratio_b = vec![0.0; dim];
    }
    let mut log_ratio_a = 0.0;
    let mut log_ratio_b = 0.0;

    for i in 0..dim {
        let d = draw_dim(kind, consts, rng, track_ratio)?;
        x_a[i] = params.mu[i] + d.off_a;
        x_b[i] = params.mu[i] + d.off_b;
        w_a[i] = d.w_a;
        w_b[i] = d.w_b;
        if track_ratio {
            dim_log_ratio_a[i] = d.log_ratio_a;
            dim_log_ratio_b[i] = d.log_ratio_b;
            log_ratio_a += d.log_ratio_a;
            log_ratio_b += d.log_ratio_b;
        }
    }
    Ok(PairDraw {
        x_a,
        x_b,
        w_a,
        w_b,
        log_ratio_a,
        log_ratio_b,
        dim_log_ratio_a,
        dim_log_ratio_b,
    })
}

/// Per-dimension draw: offsets from the mean and weights for both points of
/// an antithetic pair, plus the log importance ratio `ln(p/q)` at each.
struct DimDraw {
    off_a: f64,
    off_b: f64,
    w_a: f64,
    w_b: f64,
    log_ratio_a: f64,
    log_ratio_b: f64,
}

fn draw_dim<R: Rng + ?Sized>(
    kind: &EstimatorKind,
    consts: &KindConsts,
    rng: &mut R,
    want_ratio: bool,
) -> Result<DimDraw> {
    let sigma = consts.sigma;
    match kind {
        EstimatorKind::GlrMu => {
            let eps = standard_normal(rng);
            let w = eps / sigma;
            Ok(DimDraw {
                off_a: sigma * eps,
                off_b: -(sigma * eps),
                w_a: w,
                w_b: -w,
                log_ratio_a: 0.0,
                log_ratio_b: 0.0,
            })
        }
        EstimatorKind::GlrSigma => {
            let eps = standard_normal(rng);
            let w = (eps * eps - 1.0) / sigma;
            Ok(DimDraw {
                off_a: sigma * eps,
                off_b: -(sigma * eps),
                w_a: w,
                w_b: w,
                log_ratio_a: 0.0,
                log_ratio_b: 0.0,
            })
        }
        EstimatorKind::Blr { alpha } => {
            let u = uniform_open01(rng);
            let xu = specfn::sym_beta_inv_cdf(*alpha, u)?;
            let eps_beta = xu - 0.5;
            let w = 2.0 * eps_beta * (alpha - 1.0) / ((0.25 - eps_beta * eps_beta) * consts.k);
            Ok(DimDraw {
                off_a: consts.k * eps_beta,
                off_b: -(consts.k * eps_beta),
                w_a: w,
                w_b: -w,
                log_ratio_a: 0.0,
                log_ratio_b: 0.0,
            })
        }
        EstimatorKind::Slrg => {
            let eps_h = uniform_open01(rng);
            let s = random_sign(rng);
            let r = b_radius(eps_h, sigma);
            let w = s * consts.weight_const;
            // p_N / p_B at radius r: 2 sigma / (r sqrt(2 pi)).
            let lr = if want_ratio {
                (2.0 * sigma / (r * SQRT_2PI)).ln()
            } else {
                0.0
            };
            Ok(DimDraw {
                off_a: s * r,
                off_b: -(s * r),
                w_a: w,
                w_b: -w,
                log_ratio_a: lr,
                log_ratio_b: lr,
            })
        }
        EstimatorKind::Trrg { c } => {
            let u = uniform_open01(rng);
            let s = random_sign(rng);
            let eps_c = specfn::sample_truncated_normal(u, *c, f64::INFINITY)?;
            let r = trunc_ratio_radius(eps_c, *c, sigma);
            let w = s * consts.weight_const * eps_c;
            // p_N / p_tr = sigma eps_c sf_scaled(c) / r; infinite at r = 0.
            let lr = if want_ratio {
                (0.5 * consts.weight_const * sigma * sigma * eps_c / r).ln()
            } else {
                0.0
            };
            Ok(DimDraw {
                off_a: s * r,
                off_b: -(s * r),
                w_a: w,
                w_b: -w,
                log_ratio_a: lr,
                log_ratio_b: lr,
            })
        }
        EstimatorKind::Brg { alpha } => {
            let eps_h = uniform_open01(rng);
            let s = random_sign(rng);
            let off_u = beta_slice_unit_offset(eps_h, *alpha);
            let w = s * consts.weight_const;
            // p_beta / p_slice in unit coordinates.
            let lr = if want_ratio {
                let t = 0.25 - off_u * off_u;
                (t * 0.25f64.powf(alpha - 1.0) / (consts.beta_fn * (alpha - 1.0) * off_u)).ln()
            } else {
                0.0
            };
            Ok(DimDraw {
                off_a: s * consts.k * off_u,
                off_b: -(s * consts.k * off_u),
                w_a: w,
                w_b: -w,
                log_ratio_a: lr,
                log_ratio_b: lr,
            })
        }
        EstimatorKind::Wrg => {
            let eps_h = uniform_open01(rng);
            let s = random_sign(rng);
            let r_inner = w_radius(eps_h, Branch::Principal, sigma)?;
            let r_outer = w_radius(eps_h, Branch::NegOne, sigma)?;
            // Inner lobe has (x-mu)^2/sigma^2 < 1, so its weight sign is
            // negative; the pair flips the branch, giving exact weight
            // negation.
            let w = consts.weight_const;
            let (lra, lrb) = if want_ratio {
                (w_log_ratio(r_inner / sigma), w_log_ratio(r_outer / sigma))
            } else {
                (0.0, 0.0)
            };
            Ok(DimDraw {
                off_a: s * r_inner,
                off_b: s * r_outer,
                w_a: -w,
                w_b: w,
                log_ratio_a: lra,
                log_ratio_b: lrb,
            })
        }
        EstimatorKind::Lrg => {
            let eps_h = uniform_open01(rng);
            let eps_x = standard_normal(rng);
            let s = random_sign(rng);
            let r = l_radius(eps_h, eps_x, sigma);
            let w = s / r;
            let lr = if want_ratio {
                -2.0 * (r / sigma).ln()
            } else {
                0.0
            };
            Ok(DimDraw {
                off_a: s * r,
                off_b: -(s * r),
                w_a: w,
                w_b: -w,
                log_ratio_a: lr,
                log_ratio_b: lr,
            })
        }
        _ => Err(Error::Config(format!(
            "`{kind}` has no per-dimension sampler"
        ))),
    }
}

/// `ln(p_N / p_W)` at normalized radius `z`.
fn w_log_ratio(z: f64) -> f64 {
    // p_N / p_W = 4 / (sqrt(2 pi e) |z^2 - 1|)
    (4.0 / ((2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt()
        * (z * z - 1.0).abs()))
    .ln()
}

fn draw_directional_pair<R: Rng + ?Sized>(
    kind: &EstimatorKind,
    params: &BaseParams,
    consts: &KindConsts,
    rng: &mut R,
) -> Result<PairDraw> {
    let dim = params.dim();
    let dof = dim as u32 + if matches!(kind, EstimatorKind::Drg) { 1 } else { 2 };
    let normals: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
    let chi_normals: Vec<f64> = (0..dof).map(|_| standard_normal(rng)).collect();
    let r_hat = unit_sphere_sample(&normals)?;
    let z = chi_radius(&chi_normals);
    let sigma = consts.sigma;
    let wc = match kind {
        EstimatorKind::Drg => consts.weight_const,
        EstimatorKind::Dlrg => dim as f64 / (z * sigma),
        _ => unreachable!(),
    };
    let mut x_a = vec![0.0; dim];
    let mut x_b = vec![0.0; dim];
    let mut w_a = vec![0.0; dim];
    let mut w_b = vec![0.0; dim];
    for i in 0..dim {
        let off = sigma * z * r_hat[i];
        x_a[i] = params.mu[i] + off;
        x_b[i] = params.mu[i] - off;
        let w = wc * r_hat[i];
        w_a[i] = w;
        w_b[i] = -w;
    }
    Ok(PairDraw {
        x_a,
        x_b,
        w_a,
        w_b,
        log_ratio_a: 0.0,
        log_ratio_b: 0.0,
        dim_log_ratio_a: Vec::new(),
        dim_log_ratio_b: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Gradient estimation
// ---------------------------------------------------------------------------

/// Estimate the gradient of `E[phi]` with `n_samples` evaluations of `phi`.
///
/// Antithetic mode consumes samples in reflected pairs (`n_samples` must be
/// even); the per-dimension scheme is controlled by
/// [`EstimateOpts::per_dim_weights`]. The estimate is a pure fold over the
/// provided stream: identical streams give identical results.
pub fn estimate_gradient(
    kind: &EstimatorKind,
    params: &BaseParams,
    phi: &mut dyn PhiOracle,
    n_samples: usize,
    rng: &mut impl Rng,
    opts: &EstimateOpts,
) -> Result<GradientEstimate> {
    kind.validate()?;
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be positive".into()));
    }
    if opts.antithetic && n_samples % 2 != 0 {
        return Err(Error::Config(format!(
            "antithetic pairing requires an even sample count, got {n_samples}"
        )));
    }
    if matches!(kind, EstimatorKind::Rp) {
        let est = rp_gradient(phi, params, n_samples, rng)?;
        return Ok(GradientEstimate {
            grad: est.mu_grad,
            n_samples: est.n_samples,
            summed_variance: est.mu_summed_variance,
        });
    }
    if kind.is_directional() && !opts.per_dim_weights {
        return Err(Error::Config(
            "directional estimators are inherently joint; per_dim_weights does not apply".into(),
        ));
    }

    let dim = params.dim();
    let consts = KindConsts::new(kind, params)?;
    let draws = if opts.antithetic {
        n_samples / 2
    } else {
        n_samples
    };

    // Streaming accumulators. Weight sums are accumulated per draw-group so
    // exact pairwise cancellation is preserved in floating point.
    let mut acc_wphi = vec![0.0; dim];
    let mut acc_w = vec![0.0; dim];
    let mut acc_w2 = vec![0.0; dim];
    let mut acc_w2phi = vec![0.0; dim];
    let mut acc_phi = 0.0;
    // Per-draw contributions for the summed-variance statistic.
    let mut contrib_sum = vec![0.0; dim];
    let mut contrib_sq = vec![0.0; dim];

    let weight_at = |w: &[f64], lr_total: f64, lr_dim: &[f64], i: usize| -> f64 {
        if opts.per_dim_weights || !kind.is_slice_ratio() {
            w[i]
        } else {
            // Full factorized weight: include prod_{j != i} p_j / q_j.
            w[i] * (lr_total - lr_dim[i]).exp()
        }
    };

    let want_ratio = !opts.per_dim_weights && kind.is_slice_ratio();
    for _ in 0..draws {
        let pair = draw_pair_inner(kind, params, &consts, rng, want_ratio)?;
        let phi_a = phi.value(&pair.x_a);
        if opts.antithetic {
            let phi_b = phi.value(&pair.x_b);
            acc_phi += phi_a + phi_b;
            for i in 0..dim {
                let wa = weight_at(&pair.w_a, pair.log_ratio_a, &pair.dim_log_ratio_a, i);
                let wb = weight_at(&pair.w_b, pair.log_ratio_b, &pair.dim_log_ratio_b, i);
                let contrib = wa * phi_a + wb * phi_b;
                acc_wphi[i] += contrib;
                acc_w[i] += wa + wb; // exactly zero for mean-gradient kinds
                acc_w2[i] += wa * wa + wb * wb;
                acc_w2phi[i] += wa * wa * phi_a + wb * wb * phi_b;
                let c = 0.5 * contrib;
                contrib_sum[i] += c;
                contrib_sq[i] += c * c;
            }
        } else {
            acc_phi += phi_a;
            for i in 0..dim {
                let wa = weight_at(&pair.w_a, pair.log_ratio_a, &pair.dim_log_ratio_a, i);
                let contrib = wa * phi_a;
                acc_wphi[i] += contrib;
                acc_w[i] += wa;
                acc_w2[i] += wa * wa;
                acc_w2phi[i] += wa * wa * phi_a;
                contrib_sum[i] += contrib;
                contrib_sq[i] += contrib * contrib;
            }
        }
    }

    let n = n_samples as f64;
    let mut grad = vec![0.0; dim];
    for i in 0..dim {
        let b = match opts.baseline {
            Baseline::None => 0.0,
            Baseline::PlainMean => acc_phi / n,
            Baseline::Optimal => {
                if acc_w2[i] == 0.0 {
                    return Err(Error::Degenerate(
                        "optimal baseline undefined: all weights are zero".into(),
                    ));
                }
                acc_w2phi[i] / acc_w2[i]
            }
        };
        grad[i] = (acc_wphi[i] - b * acc_w[i]) / n;
        if !grad[i].is_finite() {
            return Err(Error::Diverged(format!(
                "gradient coordinate {i} is not finite"
            )));
        }
    }

    let summed_variance = summed_variance(&contrib_sum, &contrib_sq, draws);
    Ok(GradientEstimate {
        grad,
        n_samples,
        summed_variance,
    })
}

/// Sum over coordinates of `Var[mean of draws]` from per-draw sums and
/// squared sums.
fn summed_variance(sum: &[f64], sq: &[f64], draws: usize) -> f64 {
    if draws < 2 {
        return 0.0;
    }
    let p = draws as f64;
    sum.iter()
        .zip(sq.iter())
        .map(|(&s, &s2)| {
            let var = ((s2 - s * s / p) / (p - 1.0)).max(0.0);
            var / p
        })
        .sum()
}

/// Reparameterization gradient estimate w.r.t. both the mean and the scale.
#[derive(Debug, Clone)]
pub struct RpGradient {
    pub mu_grad: Vec<f64>,
    pub sigma_grad: Vec<f64>,
    pub n_samples: usize,
    pub mu_summed_variance: f64,
    pub sigma_summed_variance: f64,
}

/// Pathwise gradient through `x = mu + sigma eps`: the mean-gradient
/// averages `d phi / d x_i` and the scale-gradient averages
/// `(d phi / d x_i) eps_i`.
pub fn rp_gradient(
    phi: &mut dyn PhiOracle,
    params: &BaseParams,
    n_samples: usize,
    rng: &mut impl Rng,
) -> Result<RpGradient> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be positive".into()));
    }
    let dim = params.dim();
    let mut mu_sum = vec![0.0; dim];
    let mut mu_sq = vec![0.0; dim];
    let mut sg_sum = vec![0.0; dim];
    let mut sg_sq = vec![0.0; dim];
    let mut x = vec![0.0; dim];
    let mut eps = vec![0.0; dim];
    for _ in 0..n_samples {
        for i in 0..dim {
            eps[i] = standard_normal(rng);
            x[i] = params.mu[i] + params.sigma * eps[i];
        }
        let g = phi.grad(&x).ok_or_else(|| {
            Error::MissingGradient("reparameterization requires d phi / d x".into())
        })?;
        if g.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                got: g.len(),
            });
        }
        for i in 0..dim {
            mu_sum[i] += g[i];
            mu_sq[i] += g[i] * g[i];
            let se = g[i] * eps[i];
            sg_sum[i] += se;
            sg_sq[i] += se * se;
        }
    }
    let n = n_samples as f64;
    Ok(RpGradient {
        mu_grad: mu_sum.iter().map(|s| s / n).collect(),
        sigma_grad: sg_sum.iter().map(|s| s / n).collect(),
        n_samples,
        mu_summed_variance: summed_variance(&mu_sum, &mu_sq, n_samples),
        sigma_summed_variance: summed_variance(&sg_sum, &sg_sq, n_samples),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;

    fn gp(mu: f64, sigma: f64) -> GaussianParams {
        GaussianParams::new(mu, sigma).unwrap()
    }

    fn all_kinds() -> Vec<EstimatorKind> {
        vec![
            EstimatorKind::GlrMu,
            EstimatorKind::GlrSigma,
            EstimatorKind::Blr { alpha: 1.5 },
            EstimatorKind::Rp,
            EstimatorKind::Slrg,
            EstimatorKind::Wrg,
            EstimatorKind::Lrg,
            EstimatorKind::Trrg { c: 0.5 },
            EstimatorKind::Brg { alpha: 1.5 },
            EstimatorKind::Drg,
            EstimatorKind::Dlrg,
        ]
    }

    #[test]
    fn estimator_spellings_round_trip() {
        for kind in all_kinds() {
            let rt = EstimatorKind::parse(&kind.to_string()).unwrap();
            assert_eq!(rt, kind);
        }
        let list = EstimatorKind::parse_list("glr, slrg,trrg:0.5,brg:1.5").unwrap();
        assert_eq!(list.len(), 4);
        assert_eq!(list[2], EstimatorKind::Trrg { c: 0.5 });
        assert!(EstimatorKind::parse("nope").is_err());
        assert!(EstimatorKind::parse("trrg").is_err()); // parameter required
        assert!(EstimatorKind::parse("slrg:1.0").is_err()); // takes none
        assert!(EstimatorKind::parse("brg:0.9").is_err()); // alpha must exceed 1
        assert!(EstimatorKind::parse("trrg:-1").is_err());
        assert_eq!(EstimatorKind::parse("slr").unwrap(), EstimatorKind::GlrSigma);
    }

    #[test]
    fn gaussian_score_weights() {
        let p = gp(2.0, 0.5);
        assert_eq!(score_weight_gaussian_mu(2.0, &p), 0.0);
        assert!((score_weight_gaussian_mu(2.5, &p) - 1.0 / 0.5).abs() < 1e-15);
        assert_eq!(score_weight_gaussian_sigma(2.5, &p), 0.0);
        assert_eq!(score_weight_gaussian_sigma(1.5, &p), 0.0);
        assert!((score_weight_gaussian_sigma(2.0, &p) + 1.0 / 0.5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_score_expectations() {
        // E[w_mu x] = d/dmu E[x] = 1 and E[w_sigma x^2] = d/dsigma E[x^2]
        // = 2 sigma at mu = 0; plain score expectations vanish.
        let p = gp(0.0, 1.3);
        let mut rng = substream(31, "score-exp", &[]);
        let n = 200_000;
        let (mut s_mu, mut s_sig, mut wx, mut wx2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = p.mu + p.sigma * standard_normal(&mut rng);
            let wm = score_weight_gaussian_mu(x, &p);
            let ws = score_weight_gaussian_sigma(x, &p);
            s_mu += wm;
            s_sig += ws;
            wx += wm * x;
            wx2 += ws * x * x;
        }
        let n = n as f64;
        assert!((s_mu / n).abs() < 0.01);
        assert!((s_sig / n).abs() < 0.01);
        assert!((wx / n - 1.0).abs() < 0.02, "{}", wx / n);
        assert!((wx2 / n - 2.0 * p.sigma).abs() < 0.05, "{}", wx2 / n);
    }

    #[test]
    fn beta_score_weight_shape() {
        assert_eq!(score_weight_beta_mu(0.0, 1.5, 2.0).unwrap(), 0.0);
        let near = score_weight_beta_mu(0.4999, 1.1, 1.0).unwrap();
        let nearer = score_weight_beta_mu(0.49999, 1.1, 1.0).unwrap();
        assert!(nearer > near && near > 100.0, "pole: {near}, {nearer}");
        let f = score_weight_beta_mu(0.3, 1.5, 1.0).unwrap();
        let g = score_weight_beta_mu(-0.3, 1.5, 1.0).unwrap();
        assert_eq!(f, -g);
        assert!(score_weight_beta_mu(0.5, 1.5, 1.0).is_err());
        assert!(score_weight_beta_mu(0.1, 1.0, 1.0).is_err());
        // Mean of the score over its own base distribution vanishes. The
        // score second moment is infinite for alpha < 2 (that is the
        // pathology BRG removes), so the tight tolerance needs alpha > 2.
        for (alpha, tol) in [(2.5, 0.01), (1.5, 0.1)] {
            let k = 2.0 * (2.0 * alpha + 1.0f64).sqrt();
            let mut rng = substream(32, "beta-score", &[(alpha * 10.0) as u64]);
            let mut acc = 0.0;
            let n = 100_000;
            for _ in 0..n {
                let u = crate::rng::uniform_open01(&mut rng);
                let eps = specfn::sym_beta_inv_cdf(alpha, u).unwrap() - 0.5;
                acc += score_weight_beta_mu(eps, alpha, k).unwrap();
            }
            assert!((acc / n as f64).abs() < tol, "alpha={alpha}: {}", acc / n as f64);
        }
    }

    #[test]
    fn slice_weight_constants() {
        // SLRG magnitude is 2 / (sigma sqrt(2 pi)).
        let w = is_weight(&EstimatorKind::Slrg, 1.3, 1.0, 2.0, &SamplerAux::None).unwrap();
        assert!((w - (2.0 / std::f64::consts::PI).sqrt() / 2.0).abs() < 1e-16);
        let w_neg = is_weight(&EstimatorKind::Slrg, 0.7, 1.0, 2.0, &SamplerAux::None).unwrap();
        assert_eq!(w, -w_neg);

        // BRG on the unit interval (k = 1): 2 * 0.25 / B(2,2) = 3.
        let sigma_unit = 0.5 / (2.0 * 2.0 + 1.0f64).sqrt();
        let w = is_weight(
            &EstimatorKind::Brg { alpha: 2.0 },
            0.8,
            0.5,
            sigma_unit,
            &SamplerAux::None,
        )
        .unwrap();
        assert!((w - 3.0).abs() < 1e-12, "{w}");

        // TRRG at c = 0 reduces to the Gaussian score magnitude.
        let (mu, sigma) = (0.4, 1.7);
        for eps_c in [0.2, 1.0, 2.5] {
            let x = mu + sigma * eps_c;
            let w = is_weight(
                &EstimatorKind::Trrg { c: 0.0 },
                x,
                mu,
                sigma,
                &SamplerAux::EpsC(eps_c),
            )
            .unwrap();
            let score = score_weight_gaussian_mu(x, &gp(mu, sigma));
            assert!(((w - score) / score).abs() < 1e-14, "{w} vs {score}");
        }

        // DRG at D = 1 equals the SLRG constant exactly (bitwise).
        let z = 1.234;
        let x = 0.0 + 2.0 * z; // mu = 0, sigma = 2, r_hat = +1
        let w_drg = is_weight(
            &EstimatorKind::Drg,
            x,
            0.0,
            2.0,
            &SamplerAux::ChiRadius { z, dim: 1 },
        )
        .unwrap();
        let w_slrg = is_weight(&EstimatorKind::Slrg, x, 0.0, 2.0, &SamplerAux::None).unwrap();
        assert_eq!(w_drg, w_slrg);

        // aux is mandatory where the weight needs it
        assert!(is_weight(&EstimatorKind::Trrg { c: 0.5 }, 1.0, 0.0, 1.0, &SamplerAux::None).is_err());
        assert!(is_weight(&EstimatorKind::Lrg, 1.0, 0.0, 1.0, &SamplerAux::None).is_err());
        assert!(is_weight(&EstimatorKind::Drg, 1.0, 0.0, 1.0, &SamplerAux::None).is_err());
        assert!(is_weight(&EstimatorKind::GlrMu, 1.0, 0.0, 1.0, &SamplerAux::None).is_err());
    }

    #[test]
    fn reflect_baseline_and_general_weight_ops() {
        let x = vec![1.0, -2.0];
        let c = vec![0.0, 0.0];
        assert_eq!(antithetic_reflect(&x, &c).unwrap(), vec![-1.0, 2.0]);
        let center = vec![0.3, -0.9];
        assert_eq!(antithetic_reflect(&center, &center).unwrap(), center);
        let twice = antithetic_reflect(&antithetic_reflect(&x, &center).unwrap(), &center).unwrap();
        assert_eq!(twice, x);
        assert!(antithetic_reflect(&x, &[0.0]).is_err());

        assert_eq!(optimal_baseline(&[2.0, 2.0, 2.0], &[1.0, 5.0, 3.0]).unwrap(), 3.0);
        assert_eq!(optimal_baseline(&[0.5, -3.0], &[7.0, 7.0]).unwrap(), 7.0);
        assert_eq!(optimal_baseline(&[1.0, 2.0], &[0.0, 5.0]).unwrap(), 4.0);
        assert!(optimal_baseline(&[0.0, 0.0], &[1.0, 2.0]).is_err());
        assert!(optimal_baseline(&[1.0], &[1.0, 2.0]).is_err());

        // Gaussian projected height H = 2 p_max reproduces the SLRG constant.
        let sigma = 1.4;
        let h = 2.0 / (sigma * SQRT_2PI);
        let w = general_slice_weight(true, h).unwrap();
        let slrg = is_weight(&EstimatorKind::Slrg, 1.0, 0.0, sigma, &SamplerAux::None).unwrap();
        assert!(((w - slrg) / slrg).abs() < 1e-15);
        assert_eq!(general_slice_weight(false, h).unwrap(), -w);
        assert!(general_slice_weight(true, f64::INFINITY).is_err());
    }

    #[test]
    fn pair_weights_negate_exactly_for_mean_kinds() {
        let params = BaseParams::new(vec![0.3, -1.1, 0.0], 0.8).unwrap();
        for kind in all_kinds() {
            if matches!(kind, EstimatorKind::Rp) {
                continue;
            }
            let mut rng = substream(33, "pair-weights", &[]);
            for _ in 0..50 {
                let pair = draw_pair(&kind, &params, &mut rng).unwrap();
                for i in 0..params.dim() {
                    if matches!(kind, EstimatorKind::GlrSigma) {
                        assert_eq!(pair.w_a[i], pair.w_b[i]);
                    } else {
                        assert_eq!(pair.w_a[i], -pair.w_b[i], "{kind}");
                    }
                }
            }
        }
    }

    #[test]
    fn constant_phi_gives_zero_gradient() {
        let params = BaseParams::new(vec![0.2, -0.4], 0.9).unwrap();
        for kind in all_kinds() {
            if matches!(kind, EstimatorKind::Rp) {
                continue;
            }
            let mut rng = substream(34, "const-phi", &[]);
            let opts = EstimateOpts::for_kind(&kind);
            let mut phi = FnPhi(|_: &[f64]| 41.5);
            let g = estimate_gradient(&kind, &params, &mut phi, 64, &mut rng, &opts).unwrap();
            for (i, gi) in g.grad.iter().enumerate() {
                if matches!(kind, EstimatorKind::GlrSigma) {
                    // plain-mean baseline cancels up to summation rounding
                    assert!(gi.abs() < 1e-12, "{kind} coord {i}: {gi}");
                } else {
                    assert_eq!(*gi, 0.0, "{kind} coord {i}");
                }
            }
        }
        // RP with a constant phi has a zero gradient oracle.
        let mut rng = substream(34, "const-phi-rp", &[]);
        let mut phi = FnPhiGrad(|_: &[f64]| 41.5, |x: &[f64]| vec![0.0; x.len()]);
        let g = rp_gradient(&mut phi, &params, 32, &mut rng).unwrap();
        assert!(g.mu_grad.iter().all(|v| *v == 0.0));
        assert!(g.sigma_grad.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn baseline_setting_cannot_change_antithetic_mean_kind_results() {
        let params = BaseParams::new(vec![0.1, 0.7, -0.3], 1.1).unwrap();
        for kind in [
            EstimatorKind::GlrMu,
            EstimatorKind::Slrg,
            EstimatorKind::Trrg { c: 0.5 },
            EstimatorKind::Brg { alpha: 1.5 },
            EstimatorKind::Wrg,
            EstimatorKind::Lrg,
            EstimatorKind::Blr { alpha: 1.5 },
        ] {
            let run = |baseline: Baseline| {
                let mut rng = substream(35, "baseline-bit", &[]);
                let mut noise_rng = substream(36, "baseline-noise", &[]);
                let mut phi = FnPhi(|x: &[f64]| {
                    x.iter().sum::<f64>().powi(2) + standard_normal(&mut noise_rng)
                });
                let opts = EstimateOpts {
                    antithetic: true,
                    per_dim_weights: true,
                    baseline,
                };
                estimate_gradient(&kind, &params, &mut phi, 100, &mut rng, &opts)
                    .unwrap()
                    .grad
            };
            let none = run(Baseline::None);
            let mean = run(Baseline::PlainMean);
            let opt = run(Baseline::Optimal);
            assert_eq!(none, mean, "{kind}");
            assert_eq!(none, opt, "{kind}");
        }
    }

    #[test]
    fn glr_linear_phi_recovers_slope() {
        let a = [0.8, -1.4, 2.2];
        let params = BaseParams::centered(3, 1.0).unwrap();
        let mut rng = substream(37, "glr-linear", &[]);
        let mut phi = FnPhi(|x: &[f64]| x.iter().zip(a.iter()).map(|(x, a)| x * a).sum());
        let opts = EstimateOpts::for_kind(&EstimatorKind::GlrMu);
        let n = 100_000;
        let g = estimate_gradient(&EstimatorKind::GlrMu, &params, &mut phi, n, &mut rng, &opts)
            .unwrap();
        let norm2: f64 = a.iter().map(|v| v * v).sum();
        for i in 0..3 {
            let se = ((norm2 + a[i] * a[i]) / (n as f64 / 2.0)).sqrt();
            assert!(
                (g.grad[i] - a[i]).abs() < 3.0 * se,
                "coord {i}: {} vs {}",
                g.grad[i],
                a[i]
            );
        }
    }

    #[test]
    fn slrg_symmetric_quadratic_centered_at_origin() {
        let params = BaseParams::centered(4, 1.0).unwrap();
        let mut rng = substream(38, "slrg-sym", &[]);
        let mut phi = FnPhi(|x: &[f64]| x.iter().map(|v| v * v).sum());
        let opts = EstimateOpts::for_kind(&EstimatorKind::Slrg);
        let n = 100_000;
        let g =
            estimate_gradient(&EstimatorKind::Slrg, &params, &mut phi, n, &mut rng, &opts).unwrap();
        for gi in &g.grad {
            assert!(gi.abs() < 0.05, "{gi}");
        }
    }

    /// Shared quadratic-unbiasedness harness: general quadratic with a
    /// linear term, nonzero mean, analytic gradient 2 Q (mu - ctr) + a.
    fn check_quadratic_unbiased(kind: EstimatorKind, dim: usize, n: usize, tag: &str) {
        let mut srng = substream(39, tag, &[dim as u64]);
        let q: Vec<Vec<f64>> = (0..dim)
            .map(|_| (0..dim).map(|_| standard_normal(&mut srng) / dim as f64).collect())
            .collect();
        // symmetrize
        let qs: Vec<Vec<f64>> = (0..dim)
            .map(|i| (0..dim).map(|j| 0.5 * (q[i][j] + q[j][i])).collect())
            .collect();
        let a: Vec<f64> = (0..dim).map(|_| standard_normal(&mut srng)).collect();
        let ctr: Vec<f64> = (0..dim).map(|_| 0.5 * standard_normal(&mut srng)).collect();
        let mu: Vec<f64> = (0..dim).map(|_| 0.4 * standard_normal(&mut srng)).collect();
        let sigma = 0.8;
        let params = BaseParams::new(mu.clone(), sigma).unwrap();

        let qs_ref = &qs;
        let a_ref = &a;
        let ctr_ref = &ctr;
        let mut phi = FnPhi(move |x: &[f64]| {
            let mut v = 0.0;
            for i in 0..x.len() {
                let di = x[i] - ctr_ref[i];
                for j in 0..x.len() {
                    v += di * qs_ref[i][j] * (x[j] - ctr_ref[j]);
                }
                v += a_ref[i] * x[i];
            }
            v
        });
        let expect: Vec<f64> = (0..dim)
            .map(|i| {
                2.0 * (0..dim).map(|j| qs[i][j] * (mu[j] - ctr[j])).sum::<f64>() + a[i]
            })
            .collect();

        let mut rng = substream(40, tag, &[dim as u64]);
        let opts = EstimateOpts::for_kind(&kind);
        let g = estimate_gradient(&kind, &params, &mut phi, n, &mut rng, &opts).unwrap();
        // conservative per-coordinate error bar from the measured scatter
        let se_each = (g.summed_variance / dim as f64).sqrt();
        for i in 0..dim {
            assert!(
                (g.grad[i] - expect[i]).abs() < 5.0 * se_each.max(1e-3),
                "{kind} dim {dim} coord {i}: {} vs {} (se {se_each})",
                g.grad[i],
                expect[i]
            );
        }
    }

    #[test]
    fn per_dim_scheme_unbiased_on_quadratics() {
        for kind in [
            EstimatorKind::Slrg,
            EstimatorKind::Trrg { c: 0.5 },
            EstimatorKind::Brg { alpha: 1.5 },
            EstimatorKind::Lrg,
        ] {
            check_quadratic_unbiased(kind, 3, 200_000, "quad-perdim");
        }
    }

    #[test]
    fn exact_weight_estimators_unbiased_on_quadratics() {
        for kind in [
            EstimatorKind::GlrMu,
            EstimatorKind::Blr { alpha: 1.5 },
            EstimatorKind::Drg,
            EstimatorKind::Dlrg,
        ] {
            check_quadratic_unbiased(kind, 3, 200_000, "quad-exact");
        }
    }

    #[test]
    fn full_factorized_weights_also_unbiased_in_low_dim() {
        // Keeping the cross-dimension p/q factors must stay unbiased for
        // any phi; only the variance suffers.
        let dim = 2;
        let params = BaseParams::new(vec![0.2, -0.1], 0.7).unwrap();
        let mut rng = substream(41, "full-weights", &[]);
        let mut phi = FnPhi(|x: &[f64]| (x[0] - 0.3) * (x[1] + 0.5) + x[0]);
        // d/dmu E = (mu1 + 0.5, mu0 - 0.3) + (1, 0)
        let expect = [params.mu[1] + 0.5 + 1.0, params.mu[0] - 0.3];
        let opts = EstimateOpts {
            antithetic: true,
            per_dim_weights: false,
            baseline: Baseline::None,
        };
        let n = 400_000;
        let g = estimate_gradient(&EstimatorKind::Slrg, &params, &mut phi, n, &mut rng, &opts)
            .unwrap();
        let se = (g.summed_variance / dim as f64).sqrt();
        for i in 0..dim {
            assert!(
                (g.grad[i] - expect[i]).abs() < 5.0 * se,
                "coord {i}: {} vs {}",
                g.grad[i],
                expect[i]
            );
        }
    }

    #[test]
    fn noise_only_variance_ratio_is_two_over_pi() {
        // For pure-noise phi the SLRG weight magnitude is constant, so its
        // gradient variance is (2/pi) sigma^2 times smaller than GLR's
        // Var[phi]/sigma^2 -- the pi/2 accuracy factor.
        let params = BaseParams::centered(1, 1.0).unwrap();
        let repeats = 3000;
        let n = 20;
        let mut variances = vec![0.0; 2];
        for (ki, kind) in [EstimatorKind::GlrMu, EstimatorKind::Slrg].iter().enumerate() {
            let mut estimates = Vec::with_capacity(repeats);
            for rep in 0..repeats {
                let mut rng = substream(42, "noise-ratio", &[ki as u64, rep as u64]);
                let mut noise = substream(43, "noise-ratio-phi", &[rep as u64]);
                let mut phi = FnPhi(|_: &[f64]| standard_normal(&mut noise));
                let opts = EstimateOpts::for_kind(kind);
                let g = estimate_gradient(kind, &params, &mut phi, n, &mut rng, &opts).unwrap();
                estimates.push(g.grad[0]);
            }
            let mean = estimates.iter().sum::<f64>() / repeats as f64;
            variances[ki] = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
                / (repeats - 1) as f64;
        }
        let ratio = variances[1] / variances[0];
        let expect = 2.0 / std::f64::consts::PI;
        assert!(
            (ratio - expect).abs() < 0.1 * expect,
            "ratio {ratio} vs {expect}"
        );
    }

    #[test]
    fn rp_gradient_examples() {
        let params = BaseParams::centered(2, 1.0).unwrap();
        // linear phi: the mu-gradient is exact for every sample
        let a = [1.5, -0.5];
        let mut rng = substream(44, "rp-linear", &[]);
        let mut phi = FnPhiGrad(
            |x: &[f64]| x.iter().zip(a.iter()).map(|(x, a)| x * a).sum(),
            |_: &[f64]| a.to_vec(),
        );
        let g = rp_gradient(&mut phi, &params, 8, &mut rng).unwrap();
        for i in 0..2 {
            assert!((g.mu_grad[i] - a[i]).abs() < 1e-14);
        }
        assert!(g.mu_summed_variance < 1e-28);

        // phi = x^2 at mu=0, sigma=1: sigma-gradient is 2 sigma E[eps^2] = 2
        let params1 = BaseParams::centered(1, 1.0).unwrap();
        let mut rng = substream(45, "rp-quad", &[]);
        let mut phi = FnPhiGrad(
            |x: &[f64]| x[0] * x[0],
            |x: &[f64]| vec![2.0 * x[0]],
        );
        let g = rp_gradient(&mut phi, &params1, 100_000, &mut rng).unwrap();
        assert!((g.sigma_grad[0] - 2.0).abs() < 0.05, "{}", g.sigma_grad[0]);

        // missing gradient oracle
        let mut rng = substream(46, "rp-missing", &[]);
        let mut phi = FnPhi(|x: &[f64]| x[0]);
        assert!(matches!(
            rp_gradient(&mut phi, &params1, 4, &mut rng),
            Err(Error::MissingGradient(_))
        ));
        // via the generic entry point too
        assert!(estimate_gradient(
            &EstimatorKind::Rp,
            &params1,
            &mut FnPhi(|x: &[f64]| x[0]),
            4,
            &mut substream(46, "rp-missing2", &[]),
            &EstimateOpts::for_kind(&EstimatorKind::Rp),
        )
        .is_err());
    }

    #[test]
    fn configuration_errors() {
        let params = BaseParams::centered(2, 1.0).unwrap();
        let mut phi = FnPhi(|_: &[f64]| 0.0);
        let opts = EstimateOpts::for_kind(&EstimatorKind::GlrMu);
        let mut rng = substream(47, "config", &[]);
        // odd sample count under antithetic pairing
        assert!(estimate_gradient(&EstimatorKind::GlrMu, &params, &mut phi, 7, &mut rng, &opts)
            .is_err());
        assert!(estimate_gradient(&EstimatorKind::GlrMu, &params, &mut phi, 0, &mut rng, &opts)
            .is_err());
        // directional kinds reject the full-weight flag
        let opts_full = EstimateOpts {
            per_dim_weights: false,
            ..EstimateOpts::for_kind(&EstimatorKind::Drg)
        };
        assert!(
            estimate_gradient(&EstimatorKind::Drg, &params, &mut phi, 4, &mut rng, &opts_full)
                .is_err()
        );
        assert!(BaseParams::new(vec![], 1.0).is_err());
        assert!(BaseParams::new(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn dlrg_at_one_dim_matches_lrg_weights() {
        // Identical estimators in law: both weight by 1/(x - mu) with the
        // same sampling distribution of |x - mu|.
        let z = 1.7;
        let x = 0.5 + 1.2 * z;
        let w_dlrg = is_weight(
            &EstimatorKind::Dlrg,
            x,
            0.5,
            1.2,
            &SamplerAux::ChiRadius { z, dim: 1 },
        )
        .unwrap();
        assert!(((w_dlrg - 1.0 / (x - 0.5)) / w_dlrg).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn spelling_round_trip_with_parameters(
            c in 0.0..5.0f64,
            alpha in 1.0001..10.0f64,
        ) {
            for kind in [
                EstimatorKind::Trrg { c },
                EstimatorKind::Brg { alpha },
                EstimatorKind::Blr { alpha },
            ] {
                let rt = EstimatorKind::parse(&kind.to_string()).unwrap();
                prop_assert_eq!(rt, kind);
            }
        }

        #[test]
        fn reflect_is_involution(
            x in proptest::collection::vec(-1e6..1e6f64, 1..8),
            shift in -10.0..10.0f64,
        ) {
            let center: Vec<f64> = x.iter().map(|v| v * 0.25 + shift).collect();
            let r = antithetic_reflect(&x, &center).unwrap();
            let rr = antithetic_reflect(&r, &center).unwrap();
            for (orig, back) in x.iter().zip(rr.iter()) {
                prop_assert!((orig - back).abs() <= 1e-9 * orig.abs().max(1.0));
            }
        }
    }
}
