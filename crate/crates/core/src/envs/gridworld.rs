use super::{EnvError, EnvSpec, Environment, EpisodeClock, StepResult};

pub const GRID_SIZE: usize = 5;
pub const STEP_REWARD: f64 = -0.01;
pub const GOAL_REWARD: f64 = 1.0;

/// 5x5 grid, start at (0, 0), goal at (4, 4), one-hot observation of the
/// agent's cell (`row * 5 + col`).
///
/// Actions: 0 = up, 1 = right, 2 = down, 3 = left. Moves into a wall leave the
/// agent in place. Every step costs -0.01 except the step that reaches the
/// goal, which pays 1.0 and terminates. The dynamics are deterministic and
/// the start state does not depend on the seed.
#[derive(Debug, Clone)]
pub struct GridWorld {
    spec: EnvSpec,
    row: usize,
    col: usize,
    clock: EpisodeClock,
}

impl GridWorld {
    pub const UP: usize = 0;
    pub const RIGHT: usize = 1;
    pub const DOWN: usize = 2;
    pub const LEFT: usize = 3;

    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "gridworld".into(),
                obs_dim: GRID_SIZE * GRID_SIZE,
                n_actions: 4,
                max_episode_steps: 100,
            },
            row: 0,
            col: 0,
            clock: EpisodeClock::default(),
        }
    }

    pub fn position(&self) -> (usize, usize) {
        (self.row, self.col)
    }

    fn obs(&self) -> Vec<f64> {
        let mut o = vec![0.0; GRID_SIZE * GRID_SIZE];
        o[self.row * GRID_SIZE + self.col] = 1.0;
        o
    }
}

impl Default for GridWorld {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for GridWorld {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.row = 0;
        self.col = 0;
        self.clock.start();
        self.obs()
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        self.clock.begin_step(action, &self.spec)?;
        let last = GRID_SIZE - 1;
        match action {
            Self::UP => self.row = self.row.saturating_sub(1),
            Self::RIGHT => self.col = (self.col + 1).min(last),
            Self::DOWN => self.row = (self.row + 1).min(last),
            _ => self.col = self.col.saturating_sub(1),
        }
        let terminated = self.row == last && self.col == last;
        let truncated = self.clock.finish_step(terminated, &self.spec);
        Ok(StepResult {
            obs: self.obs(),
            reward: if terminated { GOAL_REWARD } else { STEP_REWARD },
            terminated,
            truncated,
        })
    }
}
