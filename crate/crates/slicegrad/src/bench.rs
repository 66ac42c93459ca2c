//! Variance benchmarks on a quadratic objective, with bootstrap confidence
//! intervals, plus distribution conformance reports.
//!
//! The objective is `phi(x) = (x - a)^T Q (x - a)` with `Q = ones(D, D)/D^2`,
//! evaluated in O(D) through its rank-1 structure
//! `phi(x) = (sum_i (x_i - a_i))^2 / D^2`, optionally plus i.i.d. Gaussian
//! noise per evaluation. Each benchmark cell runs `repeats` independent
//! gradient estimates of `n` samples each and reports the sum over
//! parameter coordinates of the per-coordinate sample variance of those
//! estimates.
//!
//! Determinism: every repeat derives its sample and noise streams from
//! `(seed, estimator, dim, repeat)`, so results are bit-identical for any
//! worker count, and noisy and noise-free runs share the same sampled `x`.

use crate::error::{Error, Result};
use crate::estimator::{
    estimate_gradient, BaseParams, EstimateOpts, EstimatorKind, FnPhi,
};
use crate::gof::{chi_square_gof, ChiSquareFit, HistBin};
use crate::rng::{self, standard_normal};
use crate::dist::DistSpec;
use rayon::prelude::*;
use std::io::Write;

/// The benchmark objective: a rank-1 quadratic bowl centered at `a`.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    pub dim: usize,
    /// Center vector `a`.
    pub a: Vec<f64>,
    /// Standard deviation of the additive evaluation noise.
    pub noise_sigma: f64,
}

impl QuadraticProblem {
    /// Center at `a = center * ones(dim)`.
    pub fn uniform_center(dim: usize, center: f64, noise_sigma: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if !(noise_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "noise sigma must be >= 0, got {noise_sigma}"
            )));
        }
        Ok(Self {
            dim,
            a: vec![center; dim],
            noise_sigma,
        })
    }

    /// `phi(x) = (sum_i (x_i - a_i))^2 / D^2 + noise_sigma * noise_draw`.
    pub fn phi(&self, x: &[f64], noise_draw: f64) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::LengthMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let s: f64 = x.iter().zip(self.a.iter()).map(|(xi, ai)| xi - ai).sum();
        let d = self.dim as f64;
        Ok(s * s / (d * d) + self.noise_sigma * noise_draw)
    }
}

/// Free-function form of the objective evaluation.
pub fn quad_phi(p: &QuadraticProblem, x: &[f64], noise_draw: f64) -> Result<f64> {
    p.phi(x, noise_draw)
}

/// Which parameter the benchmark differentiates with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GradTarget {
    Mu,
    Sigma,
}

/// Benchmark configuration.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub dims: Vec<usize>,
    /// Samples averaged into one gradient estimate (even; antithetic).
    pub samples_per_estimate: usize,
    /// Independent estimates per cell; `None` applies the default rule of
    /// 5000 up to D = 100 and 1000 above.
    pub repeats: Option<usize>,
    pub estimators: Vec<EstimatorKind>,
    pub seed: u64,
    pub bootstrap_resamples: usize,
    /// Evaluation-noise standard deviation; 0 for the deterministic case.
    pub noise_sigma: f64,
    /// The objective center `a` is this constant in every coordinate.
    pub center: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            dims: vec![1, 10, 100, 1000],
            samples_per_estimate: 100,
            repeats: None,
            estimators: vec![
                EstimatorKind::GlrMu,
                EstimatorKind::Slrg,
                EstimatorKind::Trrg { c: 0.5 },
                EstimatorKind::Brg { alpha: 1.5 },
            ],
            seed: 0,
            bootstrap_resamples: 1000,
            noise_sigma: 1.0,
            center: 1.0,
        }
    }
}

impl BenchConfig {
    fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.estimators.is_empty() {
            return Err(Error::Config(
                "need at least one dimension and one estimator".into(),
            ));
        }
        if self.samples_per_estimate == 0 || self.samples_per_estimate % 2 != 0 {
            return Err(Error::Config(format!(
                "samples_per_estimate must be even and positive, got {}",
                self.samples_per_estimate
            )));
        }
        if let Some(r) = self.repeats {
            if r < 100 {
                return Err(Error::Config(format!(
                    "fewer than 100 repeats gives meaningless confidence intervals, got {r}"
                )));
            }
        }
        if self.bootstrap_resamples < 2 {
            return Err(Error::Config("bootstrap needs at least 2 resamples".into()));
        }
        for est in &self.estimators {
            est.validate()?;
        }
        Ok(())
    }

    fn repeats_for(&self, dim: usize) -> usize {
        self.repeats.unwrap_or(if dim <= 100 { 5000 } else { 1000 })
    }
}

/// One benchmark cell result.
#[derive(Debug, Clone)]
pub struct VarianceReport {
    pub estimator: EstimatorKind,
    pub dim: usize,
    pub noise_sigma: f64,
    /// Sum over coordinates of the per-coordinate variance of the
    /// `samples`-sample gradient estimate.
    pub variance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
    pub repeats: usize,
    pub seed: u64,
}

/// Run the mean-gradient variance benchmark over `cfg.dims x cfg.estimators`.
pub fn run_variance_bench(cfg: &BenchConfig) -> Result<Vec<VarianceReport>> {
    run_bench(cfg, GradTarget::Mu)
}

/// Run the scale-gradient benchmark (`glr-sigma` and `wrg` kinds).
pub fn run_sigma_bench(cfg: &BenchConfig) -> Result<Vec<VarianceReport>> {
    for est in &cfg.estimators {
        if !est.is_sigma() {
            return Err(Error::Config(format!(
                "`{est}` does not estimate the scale gradient"
            )));
        }
    }
    run_bench(cfg, GradTarget::Sigma)
}

/// Run the mean-gradient benchmark including the alternative estimators
/// (L-distribution and the directional kinds) alongside the main ones.
pub fn run_alternatives_bench(cfg: &BenchConfig) -> Result<Vec<VarianceReport>> {
    let mut cfg = cfg.clone();
    if cfg.estimators.is_empty() {
        cfg.estimators = vec![
            EstimatorKind::GlrMu,
            EstimatorKind::Slrg,
            EstimatorKind::Trrg { c: 0.5 },
            EstimatorKind::Brg { alpha: 1.5 },
            EstimatorKind::Lrg,
            EstimatorKind::Drg,
            EstimatorKind::Dlrg,
        ];
    }
    run_bench(&cfg, GradTarget::Mu)
}

fn run_bench(cfg: &BenchConfig, target: GradTarget) -> Result<Vec<VarianceReport>> {
    cfg.validate()?;
    for est in &cfg.estimators {
        match target {
            GradTarget::Mu if est.is_sigma() || matches!(est, EstimatorKind::Rp) => {
                return Err(Error::Config(format!(
                    "`{est}` is not a mean-gradient sample-weighting estimator"
                )))
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    for est in &cfg.estimators {
        for &dim in &cfg.dims {
            out.push(run_cell(cfg, est, dim)?);
        }
    }
    Ok(out)
}

fn run_cell(cfg: &BenchConfig, est: &EstimatorKind, dim: usize) -> Result<VarianceReport> {
    let repeats = cfg.repeats_for(dim);
    let n = cfg.samples_per_estimate;
    let problem = QuadraticProblem::uniform_center(dim, cfg.center, cfg.noise_sigma)?;
    let params = BaseParams::centered(dim, 1.0)?;
    let opts = EstimateOpts::for_kind(est);
    let est_label = est.to_string();

    let grads: Vec<Vec<f64>> = (0..repeats)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let mut sample_rng =
                rng::substream(cfg.seed, &format!("bench/{est_label}/samples"), &[dim as u64, rep as u64]);
            let mut noise_rng =
                rng::substream(cfg.seed, &format!("bench/{est_label}/noise"), &[dim as u64, rep as u64]);
            let problem = &problem;
            let mut phi = FnPhi(|x: &[f64]| {
                let noise = if problem.noise_sigma > 0.0 {
                    standard_normal(&mut noise_rng)
                } else {
                    0.0
                };
                problem.phi(x, noise).expect("dimension fixed per cell")
            });
            let g = estimate_gradient(est, &params, &mut phi, n, &mut sample_rng, &opts)?;
            Ok(g.grad)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut boot_rng = rng::substream(cfg.seed, &format!("bench/{est_label}/bootstrap"), &[dim as u64]);
    let (variance, ci_low, ci_high) =
        summed_variance_with_ci(&grads, cfg.bootstrap_resamples, &mut boot_rng)?;
    Ok(VarianceReport {
        estimator: *est,
        dim,
        noise_sigma: cfg.noise_sigma,
        variance,
        ci_low,
        ci_high,
        samples: n,
        repeats,
        seed: cfg.seed,
    })
}

/// Sum over coordinates of the per-coordinate sample variance across the
/// repeat axis, with a one-standard-deviation bootstrap interval.
///
/// The bootstrap resamples the per-repeat squared deviations about the
/// full-sample mean; re-centering within each resample would change the
/// statistic by O(1/repeats), far below the interval width itself.
pub fn summed_variance_with_ci(
    grads: &[Vec<f64>],
    resamples: usize,
    rng: &mut impl rand::Rng,
) -> Result<(f64, f64, f64)> {
    let r = grads.len();
    if r < 2 {
        return Err(Error::Config("need at least 2 repeats".into()));
    }
    let dim = grads[0].len();
    let mut mean = vec![0.0; dim];
    for g in grads {
        if g.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                got: g.len(),
            });
        }
        for i in 0..dim {
            mean[i] += g[i];
        }
    }
    for m in &mut mean {
        *m /= r as f64;
    }
    let dev: Vec<f64> = grads
        .iter()
        .map(|g| {
            g.iter()
                .zip(mean.iter())
                .map(|(gi, mi)| {
                    let d = gi - mi;
                    d * d
                })
                .sum::<f64>()
        })
        .collect();
    let denom = (r - 1) as f64;
    let point: f64 = dev.iter().sum::<f64>() / denom;

    let mut boots = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut s = 0.0;
        for _ in 0..r {
            s += dev[rng.gen_range(0..r)];
        }
        boots.push(s / denom);
    }
    let bm = boots.iter().sum::<f64>() / resamples as f64;
    let bvar = boots.iter().map(|b| (b - bm) * (b - bm)).sum::<f64>() / (resamples as f64 - 1.0);
    let se = bvar.sqrt();
    Ok((point, point - se, point + se))
}

/// One-standard-deviation bootstrap interval for the sample variance of a
/// scalar data set.
pub fn bootstrap_ci(
    values: &[f64],
    resamples: usize,
    rng: &mut impl rand::Rng,
) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "bootstrap needs at least 2 values, got {n}"
        )));
    }
    if resamples < 2 {
        return Err(Error::Config("bootstrap needs at least 2 resamples".into()));
    }
    let var = |sum: f64, sumsq: f64| (sumsq - sum * sum / n as f64) / (n as f64 - 1.0);
    let (mut s, mut s2) = (0.0, 0.0);
    for &v in values {
        s += v;
        s2 += v * v;
    }
    let point = var(s, s2);
    let mut boots = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let (mut bs, mut bs2) = (0.0, 0.0);
        for _ in 0..n {
            let v = values[rng.gen_range(0..n)];
            bs += v;
            bs2 += v * v;
        }
        boots.push(var(bs, bs2).max(0.0));
    }
    let bm = boots.iter().sum::<f64>() / resamples as f64;
    let bvar = boots.iter().map(|b| (b - bm) * (b - bm)).sum::<f64>() / (resamples as f64 - 1.0);
    let se = bvar.sqrt();
    Ok((point - se, point + se))
}

// ---------------------------------------------------------------------------
// Distribution conformance
// ---------------------------------------------------------------------------

/// Histogram of sampler output against the analytic density.
#[derive(Debug, Clone)]
pub struct ConformanceReport {
    pub bins: Vec<HistBin>,
    pub fit: ChiSquareFit,
    pub n: usize,
}

/// Draw `n` samples of `d`, histogram them over the distribution's bulk
/// range, and chi-square test the counts against CDF-exact bin masses.
pub fn dist_conformance_report(
    d: &DistSpec,
    n: usize,
    bins: usize,
    seed: u64,
) -> Result<ConformanceReport> {
    if n < 10_000 {
        return Err(Error::Config(format!(
            "conformance needs at least 1e4 samples, got {n}"
        )));
    }
    if bins < 4 {
        return Err(Error::Config("need at least 4 bins".into()));
    }
    let (lo, hi) = plot_range(d);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    let mut rng = rng::substream(seed, "dist-conformance", &[]);
    for _ in 0..n {
        let x = d.draw(&mut rng)?;
        let idx = (((x - lo) / width).floor() as i64).clamp(0, bins as i64 - 1) as usize;
        counts[idx] += 1;
    }
    // Expected masses from the closed-form CDF; outermost bins absorb the
    // tails so the probabilities sum to one exactly.
    let mut expected = Vec::with_capacity(bins);
    for k in 0..bins {
        let l = if k == 0 { f64::NEG_INFINITY } else { lo + k as f64 * width };
        let r = if k == bins - 1 {
            f64::INFINITY
        } else {
            lo + (k + 1) as f64 * width
        };
        let pl = if l.is_infinite() { 0.0 } else { d.cdf(l) };
        let pr = if r.is_infinite() { 1.0 } else { d.cdf(r) };
        expected.push((pr - pl).max(0.0));
    }
    let fit = chi_square_gof(&counts, &expected, n as u64)?;
    let hist = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let center = lo + (k as f64 + 0.5) * width;
            HistBin {
                center,
                width,
                empirical_density: c as f64 / (n as f64 * width),
                analytic_pdf: d.pdf(center),
            }
        })
        .collect();
    Ok(ConformanceReport { bins: hist, fit, n })
}

/// Range covering all but a negligible sliver of probability mass.
fn plot_range(d: &DistSpec) -> (f64, f64) {
    match d {
        DistSpec::Gaussian(p) | DistSpec::BDist(p) | DistSpec::WDist(p) | DistSpec::LDist(p) => {
            (p.mu - 8.0 * p.sigma, p.mu + 8.0 * p.sigma)
        }
        DistSpec::TruncRatio(p) => (p.mu - 8.0 * p.sigma, p.mu + 8.0 * p.sigma),
        DistSpec::SymBeta(p) | DistSpec::BetaSlice(p) => (p.mu - 0.5 * p.k, p.mu + 0.5 * p.k),
        DistSpec::Chi(p) => (0.0, (p.k as f64).sqrt() + 8.0),
    }
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

/// Write variance reports as CSV:
/// `estimator,dim,noise_sigma,variance,ci_low,ci_high,samples,repeats,seed`.
pub fn write_variance_csv<W: Write + ?Sized>(out: &mut W, reports: &[VarianceReport]) -> std::io::Result<()> {
    writeln!(
        out,
        "estimator,dim,noise_sigma,variance,ci_low,ci_high,samples,repeats,seed"
    )?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.estimator, r.dim, r.noise_sigma, r.variance, r.ci_low, r.ci_high, r.samples,
            r.repeats, r.seed
        )?;
    }
    Ok(())
}

/// Write a conformance report as CSV: `x,empirical_density,analytic_pdf`.
pub fn write_conformance_csv<W: Write + ?Sized>(
    out: &mut W,
    report: &ConformanceReport,
) -> std::io::Result<()> {
    writeln!(out, "x,empirical_density,analytic_pdf")?;
    for b in &report.bins {
        writeln!(out, "{},{},{}", b.center, b.empirical_density, b.analytic_pdf)?;
    }
    Ok(())
}

/// Write the offset guideline table as CSV:
/// `c,dim_minus_one,accuracy_t,dim_minus_one_paper` (the last column is the
/// integer-rounded comparison value; the raw value stays unrounded).
pub fn write_guideline_csv<W: Write + ?Sized>(out: &mut W) -> std::io::Result<()> {
    writeln!(out, "c,dim_minus_one,accuracy_t,dim_minus_one_paper")?;
    for row in crate::analysis::guideline_table() {
        writeln!(
            out,
            "{},{},{},{}",
            row.c,
            row.dim_minus_one,
            row.accuracy_t,
            row.dim_minus_one.round() as i64
        )?;
    }
    Ok(())
}
