//! Evolution strategies: optimize `E_{w ~ p(w; mu)}[phi(w)]` over the mean
//! of a sampling distribution on policy parameters, using any of the
//! mean-gradient estimators.
//!
//! Each iteration draws `popsize/2` antithetic pairs from the estimator's
//! sampling distribution (per-dimension scheme), evaluates the objective
//! once per sample, optionally normalizes returns by their standard
//! deviation, forms the gradient, and applies an SGD or Adam ascent step to
//! `mu` with `sigma` held fixed. Evaluation draws from the base
//! distribution `p` itself on a separate stream label, so it never perturbs
//! the learning trajectory.

pub mod cartpole;
pub mod opt;
pub mod policy;

pub use cartpole::{cartpole_swingup_episode, Episode};
pub use opt::{adam_step, AdamState, Optimizer, OptimizerKind};
pub use policy::{mlp_forward, Policy};

use crate::error::{Error, Result};
use crate::estimator::{draw_pair, BaseParams, EstimatorKind};
use crate::rng::{self, standard_normal};
use rayon::prelude::*;
use std::io::Write;

/// Hyperparameters of one training run.
#[derive(Debug, Clone)]
pub struct ESConfig {
    /// Samples per iteration; must be even (antithetic pairs).
    pub popsize: usize,
    /// Fixed scale of the sampling distribution.
    pub sigma: f64,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub estimator: EstimatorKind,
    /// Divide returns by `max(std of returns, 1e-8)` before weighting.
    pub reward_normalize: bool,
    pub iterations: usize,
    /// Evaluate from the base distribution every this many iterations.
    pub eval_every: usize,
    /// Episodes averaged into one return for environment objectives.
    pub episodes_per_sample: usize,
    pub seed: u64,
    /// Starting mean; zeros when absent.
    pub initial_mu: Option<Vec<f64>>,
}

impl Default for ESConfig {
    fn default() -> Self {
        ESConfig {
            popsize: 32,
            sigma: 0.5,
            lr: 0.01,
            optimizer: OptimizerKind::Sgd,
            estimator: EstimatorKind::GlrMu,
            reward_normalize: false,
            iterations: 2000,
            eval_every: 10,
            episodes_per_sample: 1,
            seed: 0,
            initial_mu: None,
        }
    }
}

impl ESConfig {
    fn validate(&self) -> Result<()> {
        if self.popsize < 2 || self.popsize % 2 != 0 {
            return Err(Error::Config(format!(
                "popsize must be even and at least 2, got {}",
                self.popsize
            )));
        }
        if !(self.sigma > 0.0) || !(self.lr > 0.0) {
            return Err(Error::Config("sigma and lr must be positive".into()));
        }
        if self.iterations == 0 || self.eval_every == 0 || self.episodes_per_sample == 0 {
            return Err(Error::Config(
                "iterations, eval_every and episodes_per_sample must be positive".into(),
            ));
        }
        match self.estimator {
            EstimatorKind::GlrMu
            | EstimatorKind::Slrg
            | EstimatorKind::Trrg { .. }
            | EstimatorKind::Brg { .. } => Ok(()),
            ref other => Err(Error::Config(format!(
                "`{other}` is not a mean-gradient estimator usable for ES training"
            ))),
        }
    }
}

/// What the optimizer maximizes.
#[derive(Debug, Clone)]
pub enum Objective {
    /// `phi(w) = -sum w_i^2`, optionally plus Gaussian observation noise.
    Sphere { dim: usize, noise_sigma: f64 },
    /// Cart-pole swing-up return of the `[5, 10, 1]` tanh policy.
    CartPole { horizon: usize },
}

impl Objective {
    pub fn dim(&self) -> usize {
        match self {
            Objective::Sphere { dim, .. } => *dim,
            Objective::CartPole { .. } => Policy::param_count_for(&[5, 10, 1]),
        }
    }

    /// Evaluate one parameter vector, averaging `episodes` rollouts for
    /// environments; `rng` carries all stochasticity.
    fn eval<R: rand::Rng + ?Sized>(&self, w: &[f64], episodes: usize, rng: &mut R) -> Result<f64> {
        match self {
            Objective::Sphere { noise_sigma, .. } => {
                let v: f64 = -w.iter().map(|x| x * x).sum::<f64>();
                Ok(if *noise_sigma > 0.0 {
                    v + noise_sigma * standard_normal(rng)
                } else {
                    v
                })
            }
            Objective::CartPole { horizon } => {
                let policy = Policy::from_params(&[5, 10, 1], w.to_vec())?;
                let mut total = 0.0;
                for _ in 0..episodes {
                    total += cartpole_swingup_episode(&policy, rng, *horizon)?.cumulative_reward;
                }
                Ok(total / episodes as f64)
            }
        }
    }
}

/// One training-log row.
#[derive(Debug, Clone)]
pub struct LogRow {
    pub iter: usize,
    pub mean_train_reward: f64,
    /// Most recent evaluation from the base distribution.
    pub eval_reward: f64,
    /// Summed per-coordinate variance of this iteration's gradient estimate.
    pub grad_variance: f64,
    pub elapsed_ms: u64,
}

/// Full training log plus the learned mean.
#[derive(Debug, Clone)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
    pub final_mu: Vec<f64>,
}

/// Run ES training; deterministic given the config (wall-clock timings
/// aside).
pub fn es_train(cfg: &ESConfig, objective: &Objective) -> Result<TrainLog> {
    cfg.validate()?;
    let dim = objective.dim();
    let mut mu = match &cfg.initial_mu {
        Some(m) => {
            if m.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    got: m.len(),
                });
            }
            m.clone()
        }
        None => vec![0.0; dim],
    };
    let mut optimizer = Optimizer::new(cfg.optimizer, dim)?;
    let pairs = cfg.popsize / 2;
    let start = std::time::Instant::now();
    let mut rows = Vec::with_capacity(cfg.iterations);
    let mut last_eval = f64::NAN;

    for t in 0..cfg.iterations {
        if t % cfg.eval_every == 0 {
            last_eval = evaluate(cfg, objective, &mu, t)?;
        }

        let params = BaseParams::new(mu.clone(), cfg.sigma)?;
        let draws: Vec<_> = (0..pairs)
            .map(|p| {
                let mut rng =
                    rng::substream(cfg.seed, "es/train/draw", &[t as u64, p as u64]);
                draw_pair(&cfg.estimator, &params, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;

        // One return per sample: pair p occupies sample slots 2p and 2p+1.
        let returns: Vec<(f64, f64)> = draws
            .par_iter()
            .enumerate()
            .map(|(p, d)| -> Result<(f64, f64)> {
                let mut rng_a =
                    rng::substream(cfg.seed, "es/train/phi", &[t as u64, 2 * p as u64]);
                let mut rng_b =
                    rng::substream(cfg.seed, "es/train/phi", &[t as u64, 2 * p as u64 + 1]);
                Ok((
                    objective.eval(&d.x_a, cfg.episodes_per_sample, &mut rng_a)?,
                    objective.eval(&d.x_b, cfg.episodes_per_sample, &mut rng_b)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;

        let n = cfg.popsize as f64;
        let mean_reward = returns.iter().map(|(a, b)| a + b).sum::<f64>() / n;
        let scale = if cfg.reward_normalize {
            let var = returns
                .iter()
                .map(|(a, b)| (a - mean_reward).powi(2) + (b - mean_reward).powi(2))
                .sum::<f64>()
                / (n - 1.0);
            1.0 / var.sqrt().max(1e-8)
        } else {
            1.0
        };

        let mut grad = vec![0.0; dim];
        let mut contrib_sq = vec![0.0; dim];
        for (d, (ra, rb)) in draws.iter().zip(returns.iter()) {
            let fa = ra * scale;
            let fb = rb * scale;
            for i in 0..dim {
                let c = 0.5 * (d.w_a[i] * fa + d.w_b[i] * fb);
                grad[i] += c;
                contrib_sq[i] += c * c;
            }
        }
        let mut grad_variance = 0.0;
        for i in 0..dim {
            let sum = grad[i];
            grad[i] /= pairs as f64;
            if pairs > 1 {
                let var = ((contrib_sq[i] - sum * sum / pairs as f64) / (pairs as f64 - 1.0))
                    .max(0.0);
                grad_variance += var / pairs as f64;
            }
        }

        optimizer.step(&mut mu, &grad, cfg.lr)?;
        if mu.iter().any(|m| !m.is_finite() || m.abs() > 1e6) {
            return Err(Error::Diverged(format!(
                "mean parameter exceeded guard at iteration {t}"
            )));
        }

        rows.push(LogRow {
            iter: t,
            mean_train_reward: mean_reward,
            eval_reward: last_eval,
            grad_variance,
            elapsed_ms: start.elapsed().as_millis() as u64,
        });
    }
    Ok(TrainLog {
        rows,
        final_mu: mu,
    })
}

/// Mean objective over `popsize` draws from the base distribution
/// `N(mu, sigma)`; runs on its own stream labels.
fn evaluate(cfg: &ESConfig, objective: &Objective, mu: &[f64], t: usize) -> Result<f64> {
    let vals: Vec<f64> = (0..cfg.popsize)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let mut draw_rng = rng::substream(cfg.seed, "es/eval/draw", &[t as u64, k as u64]);
            let w: Vec<f64> = mu
                .iter()
                .map(|m| m + cfg.sigma * standard_normal(&mut draw_rng))
                .collect();
            let mut phi_rng = rng::substream(cfg.seed, "es/eval/phi", &[t as u64, k as u64]);
            objective.eval(&w, cfg.episodes_per_sample, &mut phi_rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Write the training log as CSV:
/// `iter,mean_train_reward,eval_reward,grad_variance,elapsed_ms`.
pub fn write_train_csv<W: Write + ?Sized>(out: &mut W, log: &TrainLog) -> std::io::Result<()> {
    writeln!(out, "iter,mean_train_reward,eval_reward,grad_variance,elapsed_ms")?;
    for r in &log.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.iter, r.mean_train_reward, r.eval_reward, r.grad_variance, r.elapsed_ms
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// key=value configuration files
// ---------------------------------------------------------------------------

/// Partial settings parsed from a plain-text `key=value` file; CLI flags
/// override whatever the file sets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EsSettings {
    pub popsize: Option<usize>,
    pub sigma: Option<f64>,
    pub lr: Option<f64>,
    pub optimizer: Option<OptimizerKind>,
    pub estimator: Option<EstimatorKind>,
    pub reward_normalize: Option<bool>,
    pub iterations: Option<usize>,
    pub eval_every: Option<usize>,
    pub episodes_per_sample: Option<usize>,
    pub seed: Option<u64>,
    pub objective: Option<String>,
    pub dim: Option<usize>,
    pub noise: Option<f64>,
    pub horizon: Option<usize>,
}

impl EsSettings {
    /// Parse a whole file: one `key=value` per line, `#` comments, blank
    /// lines ignored.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut s = EsSettings::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected key=value, got `{line}`", lineno + 1))
            })?;
            s.set(key.trim(), value.trim())
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(s)
    }

    /// Apply one key-value pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse::<T>()
                .map_err(|_| Error::Parse(format!("bad value `{value}` for `{key}`")))
        }
        match key {
            "popsize" => self.popsize = Some(num(key, value)?),
            "sigma" => self.sigma = Some(num(key, value)?),
            "lr" => self.lr = Some(num(key, value)?),
            "optimizer" => self.optimizer = Some(OptimizerKind::parse(value)?),
            "estimator" => self.estimator = Some(EstimatorKind::parse(value)?),
            "reward_normalize" => {
                self.reward_normalize = Some(match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(Error::Parse(format!("bad bool `{value}`"))),
                })
            }
            "iterations" => self.iterations = Some(num(key, value)?),
            "eval_every" => self.eval_every = Some(num(key, value)?),
            "episodes_per_sample" => self.episodes_per_sample = Some(num(key, value)?),
            "seed" => self.seed = Some(num(key, value)?),
            "objective" => match value {
                "sphere" | "cartpole" => self.objective = Some(value.to_string()),
                _ => return Err(Error::Parse(format!("unknown objective `{value}`"))),
            },
            "dim" => self.dim = Some(num(key, value)?),
            "noise" => self.noise = Some(num(key, value)?),
            "horizon" => self.horizon = Some(num(key, value)?),
            _ => return Err(Error::Parse(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}
