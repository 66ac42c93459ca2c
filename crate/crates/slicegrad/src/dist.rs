//! Probability densities and exact samplers for the base distributions and
//! the derived importance-sampling distributions.
//!
//! Every sampler is a deterministic map from explicitly passed uniforms and
//! normals to one sample. Randomness lives entirely outside this module,
//! which is what makes antithetic pairing and parallel reproducibility
//! possible: reflecting a sample about its mean is done by flipping the sign
//! bit of the draw, never by re-deriving the offset from the sample value.
//!
//! The densities:
//!
//! - `BDist`: the Rayleigh distribution symmetrized about `mu`; proportional
//!   to `|d p_N / d mu|`, so it is the optimal importance distribution for
//!   the Gaussian mean-gradient.
//! - `WDist`: proportional to `|d p_N / d sigma|`; sampled through both real
//!   branches of the Lambert W function.
//! - `LDist`: the Maxwell-Boltzmann distribution reflected about `mu`;
//!   arises from sampling horizontal slices of the Gaussian.
//! - `TruncRatio`: interpolates between the Gaussian (`c = 0`) and the
//!   B-distribution (`c -> inf`) under a variance constraint.
//! - `BetaSlice`: the slice distribution of a symmetric Beta, proportional
//!   to `|d p_beta / d mu|`.
//! - `Chi`: radius distribution of a k-dimensional standard Gaussian; the
//!   building block of the directional multidimensional samplers.

use crate::error::{Error, Result};
use crate::rng;
use crate::specfn::{self, Branch};
use rand::Rng;

/// Mean and scale of a Gaussian; also parameterizes the B, W and L
/// distributions derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { mu, sigma })
    }
}

/// Shifted, stretched symmetric Beta: unit-interval shape `Beta(alpha,
/// alpha)` mapped through `x -> mu + k (x - 1/2)`.
///
/// The implied standard deviation is `k / (2 sqrt(2 alpha + 1))`; use
/// [`SymBetaParams::with_std`] to choose `k` for a target deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymBetaParams {
    pub alpha: f64,
    pub mu: f64,
    /// Stretch factor applied to the unit interval.
    pub k: f64,
}

impl SymBetaParams {
    pub fn new(alpha: f64, mu: f64, k: f64) -> Result<Self> {
        if !(alpha > 1.0) {
            return Err(Error::Domain(format!("alpha must exceed 1, got {alpha}")));
        }
        if !(k > 0.0) {
            return Err(Error::Domain(format!("stretch k must be positive, got {k}")));
        }
        Ok(Self { alpha, mu, k })
    }

    /// Stretch chosen so the distribution has standard deviation `sigma`:
    /// `k = 2 sigma sqrt(2 alpha + 1)`.
    pub fn with_std(alpha: f64, mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        Self::new(alpha, mu, 2.0 * sigma * (2.0 * alpha + 1.0).sqrt())
    }

    /// Map a point to the unit interval of the unstretched shape.
    #[inline]
    pub fn to_unit(&self, x: f64) -> f64 {
        0.5 + (x - self.mu) / self.k
    }
}

/// Offset parameter of the truncated-ratio family plus the underlying
/// Gaussian's mean and scale. `c = 0` degenerates to the Gaussian itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncRatioParams {
    pub c: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl TruncRatioParams {
    pub fn new(c: f64, mu: f64, sigma: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::Domain(format!("offset c must be >= 0, got {c}")));
        }
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { c, mu, sigma })
    }

    /// `exp(-c^2/2) / (1 - Phi(c))`, the normalization of the family,
    /// computed through the scaled survival function so it stays finite for
    /// any `c`.
    #[inline]
    pub fn norm_const(&self) -> f64 {
        1.0 / specfn::std_normal_sf_scaled(self.c)
    }
}

/// Degrees of freedom of a chi distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChiParams {
    pub k: u32,
}

impl ChiParams {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("chi requires k >= 1".into()));
        }
        Ok(Self { k })
    }
}

/// Tagged description of a sampling distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistSpec {
    Gaussian(GaussianParams),
    SymBeta(SymBetaParams),
    BDist(GaussianParams),
    WDist(GaussianParams),
    LDist(GaussianParams),
    TruncRatio(TruncRatioParams),
    BetaSlice(SymBetaParams),
    Chi(ChiParams),
}

/// The exact independent uniforms/normals a sampler consumes.
#[derive(Debug, Clone, PartialEq)]
pub enum UniformTuple {
    /// One standard normal (Gaussian).
    Normal { eps: f64 },
    /// One uniform in (0, 1) (symmetric Beta via its quantile).
    Uniform { u: f64 },
    /// Height uniform plus a side (B-distribution, BetaSlice, TruncRatio).
    HeightSign { eps_h: f64, positive: bool },
    /// Height uniform, side, and Lambert branch (W-distribution).
    HeightSignBranch {
        eps_h: f64,
        positive: bool,
        branch: Branch,
    },
    /// Height uniform, one standard normal, and a side (L-distribution).
    HeightNormalSign {
        eps_h: f64,
        eps_x: f64,
        positive: bool,
    },
    /// A vector of standard normals (chi via sum of squares).
    Normals { eps: Vec<f64> },
}

fn check_open_unit(u: f64, what: &str) -> Result<()> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::Domain(format!("{what} must lie in (0, 1], got {u}")));
    }
    Ok(())
}

// --- scalar sampling kernels, shared with the estimator module -------------

/// Offset from the mean of a B-distribution draw: `sigma sqrt(-2 ln eps_h)`.
#[inline]
pub(crate) fn b_radius(eps_h: f64, sigma: f64) -> f64 {
    sigma * (-2.0 * eps_h.ln()).sqrt()
}

/// Offset from the mean of an L-distribution draw.
#[inline]
pub(crate) fn l_radius(eps_h: f64, eps_x: f64, sigma: f64) -> f64 {
    sigma * (-2.0 * eps_h.ln() + eps_x * eps_x).sqrt()
}

/// Offset from the mean of a W-distribution draw on the given branch.
///
/// The inversion of the B-density gives `W(-eps_h^2/e) = -(x-mu)^2/sigma^2`,
/// so the radicand is the negated Lambert value; the principal branch
/// produces the inner lobe `|x - mu| <= sigma`, the -1 branch the outer.
#[inline]
pub(crate) fn w_radius(eps_h: f64, branch: Branch, sigma: f64) -> Result<f64> {
    let arg = -eps_h * eps_h / std::f64::consts::E;
    let w = specfn::lambert_w(branch, arg)?;
    Ok(sigma * (-w).max(0.0).sqrt())
}

/// Offset from the unit-interval midpoint of a BetaSlice draw.
#[inline]
pub(crate) fn beta_slice_unit_offset(eps_h: f64, alpha: f64) -> f64 {
    0.5 * (1.0 - eps_h.powf(1.0 / (alpha - 1.0))).max(0.0).sqrt()
}

/// Offset from the mean of a truncated-ratio draw given the truncated-normal
/// variate `eps_c >= c`.
#[inline]
pub(crate) fn trunc_ratio_radius(eps_c: f64, c: f64, sigma: f64) -> f64 {
    sigma * (eps_c * eps_c - c * c).max(0.0).sqrt()
}

/// Squared norm accumulated as a chi draw: `sqrt(sum eps_i^2)`.
pub(crate) fn chi_radius(normals: &[f64]) -> f64 {
    normals.iter().map(|e| e * e).sum::<f64>().sqrt()
}

/// Unit-interval symmetric-Beta density evaluated at edge distance
/// `u = min(x_u, 1 - x_u)`; exact symmetry about the midpoint falls out of
/// parameterizing by `u`, and `u` near 0 keeps full resolution at the
/// support edge where the mass concentrates for small `alpha`.
pub fn sym_beta_unit_pdf(alpha: f64, u: f64) -> f64 {
    if !(0.0..=0.5).contains(&u) {
        return 0.0;
    }
    let ln_b = specfn::log_beta(alpha, alpha).expect("validated alpha");
    ((alpha - 1.0) * (u * (1.0 - u)).ln() - ln_b).exp()
}

/// Unit-interval BetaSlice density at edge distance `u` (see
/// [`sym_beta_unit_pdf`]). Integrably singular at `u = 0` for `alpha < 2`.
pub fn beta_slice_unit_pdf(alpha: f64, u: f64) -> f64 {
    if !(0.0..=0.5).contains(&u) {
        return 0.0;
    }
    let t = u * (1.0 - u);
    (alpha - 1.0) / (2.0 * 0.25f64.powf(alpha - 1.0)) * t.powf(alpha - 2.0) * (1.0 - 2.0 * u)
}

/// Edge distance on the unit interval for a stretched Beta family:
/// `u = 1/2 - |x - mu| / k`, or `None` outside the support. Exact for
/// offsets near the edge (Sterbenz), hence exactly symmetric about `mu`.
#[inline]
fn unit_edge_distance(p: &SymBetaParams, x: f64) -> Option<f64> {
    let o = (x - p.mu).abs() / p.k;
    if o > 0.5 {
        None
    } else {
        Some(0.5 - o)
    }
}

// ---------------------------------------------------------------------------

impl DistSpec {
    /// Interval outside which the pdf is identically zero.
    pub fn support(&self) -> (f64, f64) {
        match self {
            DistSpec::Gaussian(_) | DistSpec::BDist(_) | DistSpec::WDist(_)
            | DistSpec::LDist(_) | DistSpec::TruncRatio(_) => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            DistSpec::SymBeta(p) | DistSpec::BetaSlice(p) => {
                (p.mu - 0.5 * p.k, p.mu + 0.5 * p.k)
            }
            DistSpec::Chi(_) => (0.0, f64::INFINITY),
        }
    }

    /// Probability density at `x`; zero outside the support, never an error.
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            DistSpec::Gaussian(p) => {
                let z = (x - p.mu) / p.sigma;
                specfn::std_normal_pdf(z) / p.sigma
            }
            DistSpec::SymBeta(p) => match unit_edge_distance(p, x) {
                Some(u) => sym_beta_unit_pdf(p.alpha, u) / p.k,
                None => 0.0,
            },
            DistSpec::BDist(p) => {
                let r = (x - p.mu).abs();
                let s2 = p.sigma * p.sigma;
                r / (2.0 * s2) * (-r * r / (2.0 * s2)).exp()
            }
            DistSpec::WDist(p) => {
                let z2 = ((x - p.mu) / p.sigma).powi(2);
                std::f64::consts::E.sqrt() / (4.0 * p.sigma) * (-0.5 * z2).exp() * (z2 - 1.0).abs()
            }
            DistSpec::LDist(p) => {
                let r = (x - p.mu).abs();
                let s2 = p.sigma * p.sigma;
                r * r / (specfn::SQRT_2PI * s2 * p.sigma) * (-r * r / (2.0 * s2)).exp()
            }
            DistSpec::TruncRatio(p) => {
                if p.c == 0.0 {
                    let z = (x - p.mu) / p.sigma;
                    return specfn::std_normal_pdf(z) / p.sigma;
                }
                let r = (x - p.mu).abs();
                let sc = p.sigma * p.c;
                p.norm_const() * r / (2.0 * p.sigma * specfn::SQRT_2PI * (r * r + sc * sc).sqrt())
                    * (-r * r / (2.0 * p.sigma * p.sigma)).exp()
            }
            DistSpec::BetaSlice(p) => match unit_edge_distance(p, x) {
                Some(u) => beta_slice_unit_pdf(p.alpha, u) / p.k,
                None => 0.0,
            },
            DistSpec::Chi(p) => {
                if x < 0.0 {
                    return 0.0;
                }
                let k = p.k as f64;
                let ln_norm = (0.5 * k - 1.0) * std::f64::consts::LN_2
                    + specfn::log_gamma(0.5 * k).expect("k >= 1");
                if x == 0.0 {
                    return if p.k == 1 {
                        (-ln_norm).exp()
                    } else {
                        0.0
                    };
                }
                ((k - 1.0) * x.ln() - 0.5 * x * x - ln_norm).exp()
            }
        }
    }

    /// Cumulative distribution function, in closed form for every family.
    ///
    /// Derived by integrating the pdfs (each symmetric family reduces to a
    /// one-sided radius law); used as the binning oracle for
    /// goodness-of-fit tests so expected masses carry no quadrature error.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            DistSpec::Gaussian(p) => specfn::std_normal_cdf((x - p.mu) / p.sigma),
            DistSpec::SymBeta(p) => match unit_edge_distance(p, x) {
                None => {
                    if x < p.mu {
                        0.0
                    } else {
                        1.0
                    }
                }
                Some(u) => {
                    let tail = specfn::reg_inc_beta(p.alpha, p.alpha, u).expect("validated");
                    if x < p.mu {
                        tail
                    } else {
                        1.0 - tail
                    }
                }
            },
            DistSpec::BDist(p) => {
                let z = (x - p.mu) / p.sigma;
                let half = -(-0.5 * z * z).exp_m1(); // 1 - exp(-z^2/2)
                fold_symmetric(z, half)
            }
            DistSpec::WDist(p) => {
                let z = ((x - p.mu) / p.sigma).abs();
                let g = z * (0.5 * (1.0 - z * z)).exp();
                let half = if z <= 1.0 { 0.5 * g } else { 1.0 - 0.5 * g };
                fold_symmetric((x - p.mu) / p.sigma, half)
            }
            DistSpec::LDist(p) => {
                let z = ((x - p.mu) / p.sigma).abs();
                let half = specfn::erf(z * std::f64::consts::FRAC_1_SQRT_2)
                    - z * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * z * z).exp();
                fold_symmetric((x - p.mu) / p.sigma, half)
            }
            DistSpec::TruncRatio(p) => {
                let z = ((x - p.mu) / p.sigma).abs();
                let e = (z * z + p.c * p.c).sqrt();
                let half = 1.0 - specfn::std_normal_sf(e) / specfn::std_normal_sf(p.c);
                fold_symmetric((x - p.mu) / p.sigma, half)
            }
            DistSpec::BetaSlice(p) => match unit_edge_distance(p, x) {
                None => {
                    if x < p.mu {
                        0.0
                    } else {
                        1.0
                    }
                }
                Some(u) => {
                    let tail = 0.5 * (4.0 * u * (1.0 - u)).powf(p.alpha - 1.0);
                    if x < p.mu {
                        tail
                    } else {
                        1.0 - tail
                    }
                }
            },
            DistSpec::Chi(p) => {
                if x <= 0.0 {
                    0.0
                } else {
                    specfn::reg_lower_gamma(0.5 * p.k as f64, 0.5 * x * x).expect("k >= 1")
                }
            }
        }
    }

    /// Deterministic sample from the explicitly passed uniforms/normals.
    pub fn sample(&self, u: &UniformTuple) -> Result<f64> {
        match (self, u) {
            (DistSpec::Gaussian(p), UniformTuple::Normal { eps }) => Ok(p.mu + p.sigma * eps),
            (DistSpec::SymBeta(p), UniformTuple::Uniform { u }) => {
                check_open_unit(*u, "beta uniform")?;
                if *u == 1.0 {
                    return Err(Error::Domain("beta uniform must lie in (0, 1)".into()));
                }
                let xu = specfn::sym_beta_inv_cdf(p.alpha, *u)?;
                Ok(p.mu + p.k * (xu - 0.5))
            }
            (DistSpec::BDist(p), UniformTuple::HeightSign { eps_h, positive }) => {
                check_open_unit(*eps_h, "eps_h")?;
                let r = b_radius(*eps_h, p.sigma);
                Ok(p.mu + sign_of(*positive) * r)
            }
            (
                DistSpec::WDist(p),
                UniformTuple::HeightSignBranch {
                    eps_h,
                    positive,
                    branch,
                },
            ) => {
                check_open_unit(*eps_h, "eps_h")?;
                let r = w_radius(*eps_h, *branch, p.sigma)?;
                Ok(p.mu + sign_of(*positive) * r)
            }
            (
                DistSpec::LDist(p),
                UniformTuple::HeightNormalSign {
                    eps_h,
                    eps_x,
                    positive,
                },
            ) => {
                check_open_unit(*eps_h, "eps_h")?;
                let r = l_radius(*eps_h, *eps_x, p.sigma);
                Ok(p.mu + sign_of(*positive) * r)
            }
            (DistSpec::TruncRatio(p), UniformTuple::HeightSign { eps_h, positive }) => {
                // u = 0 is fine here (no logarithm; eps_c lands on c).
                if !(0.0..1.0).contains(eps_h) {
                    return Err(Error::Domain(format!(
                        "eps_c uniform must lie in [0, 1), got {eps_h}"
                    )));
                }
                let eps_c = specfn::sample_truncated_normal(*eps_h, p.c, f64::INFINITY)?;
                let r = trunc_ratio_radius(eps_c, p.c, p.sigma);
                Ok(p.mu + sign_of(*positive) * r)
            }
            (DistSpec::BetaSlice(p), UniformTuple::HeightSign { eps_h, positive }) => {
                check_open_unit(*eps_h, "eps_h")?;
                let off = beta_slice_unit_offset(*eps_h, p.alpha);
                Ok(p.mu + p.k * sign_of(*positive) * off)
            }
            (DistSpec::Chi(p), UniformTuple::Normals { eps }) => {
                if eps.len() != p.k as usize {
                    return Err(Error::LengthMismatch {
                        expected: p.k as usize,
                        got: eps.len(),
                    });
                }
                Ok(chi_radius(eps))
            }
            _ => Err(Error::Config(format!(
                "uniform tuple {u:?} does not match distribution {self:?}"
            ))),
        }
    }

    /// Draw the matching [`UniformTuple`] from `rng` and sample.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let tuple = self.draw_tuple(rng);
        self.sample(&tuple)
    }

    /// Draw the exact uniforms/normals this distribution consumes.
    pub fn draw_tuple<R: Rng + ?Sized>(&self, rng: &mut R) -> UniformTuple {
        match self {
            DistSpec::Gaussian(_) => UniformTuple::Normal {
                eps: rng::standard_normal(rng),
            },
            DistSpec::SymBeta(_) => UniformTuple::Uniform {
                u: rng::uniform_open01(rng),
            },
            DistSpec::BDist(_) | DistSpec::TruncRatio(_) | DistSpec::BetaSlice(_) => {
                UniformTuple::HeightSign {
                    eps_h: rng::uniform_open01(rng),
                    positive: rng.gen(),
                }
            }
            DistSpec::WDist(_) => UniformTuple::HeightSignBranch {
                eps_h: rng::uniform_open01(rng),
                positive: rng.gen(),
                branch: if rng.gen() {
                    Branch::Principal
                } else {
                    Branch::NegOne
                },
            },
            DistSpec::LDist(_) => UniformTuple::HeightNormalSign {
                eps_h: rng::uniform_open01(rng),
                eps_x: rng::standard_normal(rng),
                positive: rng.gen(),
            },
            DistSpec::Chi(p) => UniformTuple::Normals {
                eps: (0..p.k).map(|_| rng::standard_normal(rng)).collect(),
            },
        }
    }
}

#[inline]
fn sign_of(positive: bool) -> f64 {
    if positive {
        1.0
    } else {
        -1.0
    }
}

/// Fold a one-sided radius CDF value into the symmetric two-sided CDF.
#[inline]
fn fold_symmetric(z: f64, half: f64) -> f64 {
    if z >= 0.0 {
        0.5 + 0.5 * half
    } else {
        0.5 - 0.5 * half
    }
}

// ---------------------------------------------------------------------------
// Sphere directions and the directional (chi-based) sampler
// ---------------------------------------------------------------------------

/// Normalize a vector of standard normals onto the unit sphere.
pub fn unit_sphere_sample(normals: &[f64]) -> Result<Vec<f64>> {
    if normals.is_empty() {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let norm = normals.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-300 {
        return Err(Error::Degenerate(
            "direction normals have vanishing norm".into(),
        ));
    }
    Ok(normals.iter().map(|x| x / norm).collect())
}

/// Draw `sigma * z * r_hat` with `z ~ Chi(dim + dof_offset)` and `r_hat`
/// uniform on the sphere; the sampling distribution of the directional
/// gradient estimators.
pub fn directional_sample(
    dim: usize,
    dof_offset: u32,
    sigma: f64,
    direction_normals: &[f64],
    chi_normals: &[f64],
) -> Result<Vec<f64>> {
    if !(dof_offset == 1 || dof_offset == 2) {
        return Err(Error::Config(format!(
            "dof_offset must be +1 or +2, got {dof_offset}"
        )));
    }
    if direction_normals.len() != dim {
        return Err(Error::LengthMismatch {
            expected: dim,
            got: direction_normals.len(),
        });
    }
    let k = dim as u32 + dof_offset;
    if chi_normals.len() != k as usize {
        return Err(Error::LengthMismatch {
            expected: k as usize,
            got: chi_normals.len(),
        });
    }
    let r_hat = unit_sphere_sample(direction_normals)?;
    let z = chi_radius(chi_normals);
    Ok(r_hat.into_iter().map(|r| sigma * z * r).collect())
}
