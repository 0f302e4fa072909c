use rand::Rng;

use super::{EnvError, EnvSpec, Environment, EpisodeClock, StepResult};
use crate::rng_from_seed;

const GRAVITY: f64 = 9.8;
const CART_MASS: f64 = 1.0;
const POLE_MASS: f64 = 0.1;
const TOTAL_MASS: f64 = CART_MASS + POLE_MASS;
/// Half the pole's length.
const POLE_HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = POLE_MASS * POLE_HALF_LENGTH;
const FORCE: f64 = 10.0;
const TAU: f64 = 0.02;
pub const THETA_LIMIT: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const X_LIMIT: f64 = 2.4;
/// Initial state components are drawn from `U(-INIT_RANGE, INIT_RANGE)`.
pub const INIT_RANGE: f64 = 0.05;

/// Cart-pole balancing with explicit Euler integration.
///
/// Observation `(x, x_dot, theta, theta_dot)`; action 0 pushes left, 1 pushes
/// right. Every step pays +1, including the one that ends the episode. The
/// episode terminates when `|theta| > 12 deg` or `|x| > 2.4`.
#[derive(Debug, Clone)]
pub struct CartPole {
    spec: EnvSpec,
    state: [f64; 4],
    clock: EpisodeClock,
}

impl CartPole {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "cartpole".into(),
                obs_dim: 4,
                n_actions: 2,
                max_episode_steps: 500,
            },
            state: [0.0; 4],
            clock: EpisodeClock::default(),
        }
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }

    /// Starts an episode from an explicit state.
    pub fn reset_to(&mut self, state: [f64; 4]) -> Vec<f64> {
        self.state = state;
        self.clock.start();
        state.to_vec()
    }
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for CartPole {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let state = std::array::from_fn(|_| rng.gen_range(-INIT_RANGE..INIT_RANGE));
        self.reset_to(state)
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        self.clock.begin_step(action, &self.spec)?;
        let [x, x_dot, theta, theta_dot] = self.state;
        let force = if action == 1 { FORCE } else { -FORCE };
        let (sin, cos) = theta.sin_cos();
        let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;
        self.state = [
            x + TAU * x_dot,
            x_dot + TAU * x_acc,
            theta + TAU * theta_dot,
            theta_dot + TAU * theta_acc,
        ];
        let [x, _, theta, _] = self.state;
        let terminated = !(-X_LIMIT..=X_LIMIT).contains(&x) || !(-THETA_LIMIT..=THETA_LIMIT).contains(&theta);
        let truncated = self.clock.finish_step(terminated, &self.spec);
        Ok(StepResult {
            obs: self.state.to_vec(),
            reward: 1.0,
            terminated,
            truncated,
        })
    }
}
