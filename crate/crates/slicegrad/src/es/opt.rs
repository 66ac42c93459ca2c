//! Gradient-ascent optimizers for the ES loop.

use crate::error::{Error, Result};

/// Adam state: bias-corrected first and second moment estimates.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(dim: usize, beta1: f64, beta2: f64, eps_hat: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::Config(format!(
                "Adam betas must lie in [0,1), got ({beta1}, {beta2})"
            )));
        }
        Ok(AdamState {
            beta1,
            beta2,
            eps_hat,
            t: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
        })
    }
}

/// One bias-corrected Adam ascent step applied in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
    if params.len() != state.m.len() || grad.len() != state.m.len() {
        return Err(Error::LengthMismatch {
            expected: state.m.len(),
            got: grad.len(),
        });
    }
    state.t += 1;
    let b1t = 1.0 - state.beta1.powi(state.t as i32);
    let b2t = 1.0 - state.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        let m_hat = state.m[i] / b1t;
        let v_hat = state.v[i] / b2t;
        params[i] += lr * m_hat / (v_hat.sqrt() + state.eps_hat);
    }
    Ok(())
}

/// Optimizer selection with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64 },
}

impl OptimizerKind {
    /// Adam defaults used by the ES experiments.
    pub fn adam_default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.99,
            beta2: 0.999,
        }
    }

    /// Parse `sgd`, `adam`, or `adam:<beta1>:<beta2>`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        match parts.next().map(|p| p.to_ascii_lowercase()).as_deref() {
            Some("sgd") => {
                if parts.next().is_some() {
                    return Err(Error::Parse("sgd takes no parameters".into()));
                }
                Ok(OptimizerKind::Sgd)
            }
            Some("adam") => match (parts.next(), parts.next(), parts.next()) {
                (None, _, _) => Ok(Self::adam_default()),
                (Some(b1), Some(b2), None) => {
                    let beta1 = b1
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad beta1 `{b1}`")))?;
                    let beta2 = b2
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad beta2 `{b2}`")))?;
                    Ok(OptimizerKind::Adam { beta1, beta2 })
                }
                _ => Err(Error::Parse(format!("bad optimizer spec `{s}`"))),
            },
            _ => Err(Error::Parse(format!("unknown optimizer `{s}`"))),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OptimizerKind::Sgd => write!(f, "sgd"),
            OptimizerKind::Adam { beta1, beta2 } => write!(f, "adam:{beta1}:{beta2}"),
        }
    }
}

/// Runtime optimizer instance.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd,
    Adam(AdamState),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, dim: usize) -> Result<Self> {
        Ok(match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam { beta1, beta2 } => {
                Optimizer::Adam(AdamState::new(dim, beta1, beta2, 1e-8)?)
            }
        })
    }

    /// Ascend `params` along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        match self {
            Optimizer::Sgd => {
                if params.len() != grad.len() {
                    return Err(Error::LengthMismatch {
                        expected: params.len(),
                        got: grad.len(),
                    });
                }
                for (p, g) in params.iter_mut().zip(grad.iter()) {
                    *p += lr * g;
                }
                Ok(())
            }
            Optimizer::Adam(state) => adam_step(state, params, grad, lr),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_first_step_moves_nothing() {
        let mut st = AdamState::new(3, 0.99, 0.999, 1e-8).unwrap();
        let mut p = vec![1.0, -2.0, 0.5];
        adam_step(&mut st, &mut p, &[0.0, 0.0, 0.0], 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn constant_gradient_step_approaches_lr_sign() {
        let mut st = AdamState::new(1, 0.9, 0.999, 1e-12).unwrap();
        let mut p = vec![0.0];
        let lr = 0.05;
        let mut last_step = 0.0;
        for _ in 0..5000 {
            let before = p[0];
            adam_step(&mut st, &mut p, &[-3.0], lr).unwrap();
            last_step = p[0] - before;
        }
        assert!((last_step - (-lr)).abs() < 1e-6, "step {last_step}");
    }

    #[test]
    fn adam_step_is_pure_in_its_inputs() {
        let st0 = AdamState::new(2, 0.99, 0.999, 1e-8).unwrap();
        let run = |mut st: AdamState| {
            let mut p = vec![0.3, -0.7];
            adam_step(&mut st, &mut p, &[1.0, 2.0], 0.01).unwrap();
            adam_step(&mut st, &mut p, &[-0.5, 0.25], 0.01).unwrap();
            p
        };
        assert_eq!(run(st0.clone()), run(st0));
    }

    #[test]
    fn optimizer_spec_round_trips() {
        for s in ["sgd", "adam:0.99:0.999", "adam:0.9:0.99"] {
            let k = OptimizerKind::parse(s).unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert_eq!(
            OptimizerKind::parse("adam").unwrap(),
            OptimizerKind::adam_default()
        );
        assert!(OptimizerKind::parse("rmsprop").is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut st = AdamState::new(2, 0.99, 0.999, 1e-8).unwrap();
        let mut p = vec![0.0; 2];
        assert!(adam_step(&mut st, &mut p, &[1.0], 0.1).is_err());
    }
}
