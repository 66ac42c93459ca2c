//! Cart-pole swing-up environment.
//!
//! Frictionless cart on an unbounded track with a pole hanging down at the
//! start; the policy applies a horizontal force and is rewarded for keeping
//! the pole tip high while staying near the origin with small actions.
//!
//! Fixed constants: cart mass 1.0, pole mass 0.1, pole length 0.5, force
//! scale 10 x action, time step 0.02, zero friction. Randomness enters only
//! through the initial state, so an episode is a deterministic function of
//! the policy and its stream.

use super::policy::Policy;
use crate::error::{Error, Result};
use crate::rng::standard_normal;
use rand::Rng;

const CART_MASS: f64 = 1.0;
const POLE_MASS: f64 = 0.1;
const POLE_LENGTH: f64 = 0.5;
const FORCE_SCALE: f64 = 10.0;
const DT: f64 = 0.02;
const GRAVITY: f64 = 9.8;

/// Outcome of one rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub cumulative_reward: f64,
    pub steps: usize,
}

/// Run one swing-up episode. The policy observes
/// `(x, x_dot, cos theta, sin theta, theta_dot)` with `theta` measured from
/// upright, and its scalar action in (-1, 1) is scaled to a force.
///
/// Per-step reward: `cos theta - 0.01 x^2 - 0.01 action^2`, so the reward
/// is bounded above by 1. A numerical blow-up terminates the episode early
/// with the reward accumulated so far.
pub fn cartpole_swingup_episode<R: Rng + ?Sized>(
    policy: &Policy,
    rng: &mut R,
    horizon: usize,
) -> Result<Episode> {
    if policy.input_size() != 5 {
        return Err(Error::Config(format!(
            "cart-pole policy must take 5 inputs, takes {}",
            policy.input_size()
        )));
    }
    if horizon == 0 {
        return Err(Error::Config("horizon must be positive".into()));
    }

    // Hanging start with small Gaussian perturbations.
    let mut x = 0.05 * standard_normal(rng);
    let mut x_dot = 0.05 * standard_normal(rng);
    let mut theta = std::f64::consts::PI + 0.05 * standard_normal(rng);
    let mut theta_dot = 0.05 * standard_normal(rng);

    let total_mass = CART_MASS + POLE_MASS;
    let mut reward = 0.0;
    let mut steps = 0;
    let mut state = [0.0; 5];
    for _ in 0..horizon {
        state[0] = x;
        state[1] = x_dot;
        state[2] = theta.cos();
        state[3] = theta.sin();
        state[4] = theta_dot;
        let action = policy.forward(&state)?[0];
        let force = FORCE_SCALE * action;

        let cos_t = theta.cos();
        let sin_t = theta.sin();
        let temp = (force + POLE_MASS * POLE_LENGTH * theta_dot * theta_dot * sin_t) / total_mass;
        let theta_acc = (GRAVITY * sin_t - cos_t * temp)
            / (POLE_LENGTH * (4.0 / 3.0 - POLE_MASS * cos_t * cos_t / total_mass));
        let x_acc = temp - POLE_MASS * POLE_LENGTH * theta_acc * cos_t / total_mass;

        // Semi-implicit Euler: velocities first, then positions.
        x_dot += DT * x_acc;
        x += DT * x_dot;
        theta_dot += DT * theta_acc;
        theta += DT * theta_dot;

        reward += cos_t - 0.01 * x * x - 0.01 * action * action;
        steps += 1;

        let blown_up = !x.is_finite()
            || !theta.is_finite()
            || !x_dot.is_finite()
            || !theta_dot.is_finite()
            || x.abs() > 1e3
            || theta_dot.abs() > 1e4;
        if blown_up {
            break;
        }
    }
    Ok(Episode {
        cumulative_reward: reward,
        steps,
    })
}
