//! Small deterministic environments that emit feature vectors directly.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, ChaCha8Rng, Stream};

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Episodic environment with a discrete action set.
///
/// `step` is only legal between a `reset` and the step that reports `done`.
pub trait Environment {
    fn num_actions(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn max_steps(&self) -> usize;
    /// Starts a new episode. The same seed always gives the same episode.
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<Step>;
}

fn check_action(action: usize, num_actions: usize) -> Result<()> {
    if action >= num_actions {
        return Err(Error::input(format!(
            "action {action} out of range 0..{num_actions}"
        )));
    }
    Ok(())
}

/// Noise amplitude used by the noisy gridworld unless configured otherwise.
pub const DEFAULT_NOISE_AMPLITUDE: f64 = 0.0005;

#[derive(Clone, Debug, PartialEq)]
pub struct GridWorldSpec {
    pub side: usize,
    /// `(row, col)`
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub step_reward: f64,
    pub goal_reward: f64,
    pub max_steps: usize,
    /// Half-width of the uniform noise added to every observation component,
    /// resampled on every step. Zero gives exact one-hot observations.
    pub noise: f64,
}

impl Default for GridWorldSpec {
    fn default() -> Self {
        GridWorldSpec {
            side: 5,
            start: (0, 0),
            goal: (4, 4),
            step_reward: 0.0,
            goal_reward: 10.0,
            max_steps: 50,
            noise: 0.0,
        }
    }
}

impl GridWorldSpec {
    pub fn noisy() -> Self {
        GridWorldSpec {
            noise: DEFAULT_NOISE_AMPLITUDE,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.side < 2 {
            return Err(Error::config("side", "gridworld side must be at least 2"));
        }
        let inside = |(r, c): (usize, usize)| r < self.side && c < self.side;
        if !inside(self.start) || !inside(self.goal) {
            return Err(Error::config(
                "goal",
                "start and goal must lie inside the grid",
            ));
        }
        if self.start == self.goal {
            return Err(Error::config("goal", "start and goal must differ"));
        }
        if self.max_steps == 0 {
            return Err(Error::config("max_steps", "must be at least 1"));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::config("noise", "must be a non-negative number"));
        }
        if !self.step_reward.is_finite() || !self.goal_reward.is_finite() {
            return Err(Error::config("goal_reward", "rewards must be finite"));
        }
        Ok(())
    }

    /// Fewest moves from start to goal, by breadth-first search.
    pub fn shortest_path_len(&self) -> usize {
        let n = self.side;
        let mut dist = vec![usize::MAX; n * n];
        let mut queue = VecDeque::from([self.start]);
        dist[self.start.0 * n + self.start.1] = 0;
        while let Some(cell) = queue.pop_front() {
            let d = dist[cell.0 * n + cell.1];
            if cell == self.goal {
                return d;
            }
            for action in 0..4 {
                let next = grid_move(cell, action, n);
                let slot = &mut dist[next.0 * n + next.1];
                if *slot == usize::MAX {
                    *slot = d + 1;
                    queue.push_back(next);
                }
            }
        }
        unreachable!("every cell of an open grid is reachable")
    }

    /// Best achievable undiscounted score, assuming the goal is reachable
    /// within `max_steps` and step rewards are not positive.
    pub fn optimal_score(&self) -> f64 {
        self.goal_reward + (self.shortest_path_len() - 1) as f64 * self.step_reward
    }
}

fn grid_move((row, col): (usize, usize), action: usize, side: usize) -> (usize, usize) {
    match action {
        0 => (row.saturating_sub(1), col),
        1 => ((row + 1).min(side - 1), col),
        2 => (row, col.saturating_sub(1)),
        _ => (row, (col + 1).min(side - 1)),
    }
}

/// Four-connected grid with walls on the border. Actions: up, down, left, right.
#[derive(Clone, Debug)]
pub struct GridWorld {
    spec: GridWorldSpec,
    pos: (usize, usize),
    steps: usize,
    active: bool,
    rng: ChaCha8Rng,
}

impl GridWorld {
    pub fn new(spec: GridWorldSpec) -> Result<Self> {
        spec.validate()?;
        Ok(GridWorld {
            pos: spec.start,
            spec,
            steps: 0,
            active: false,
            rng: rng::seeded(0, Stream::Environment),
        })
    }

    pub fn spec(&self) -> &GridWorldSpec {
        &self.spec
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    fn observe(&mut self) -> Vec<f64> {
        let n = self.spec.side;
        let mut obs = vec![0.0; n * n];
        obs[self.pos.0 * n + self.pos.1] = 1.0;
        if self.spec.noise > 0.0 {
            let a = self.spec.noise;
            for v in &mut obs {
                *v += self.rng.random_range(-a..a);
            }
        }
        obs
    }
}

impl Environment for GridWorld {
    fn num_actions(&self) -> usize {
        4
    }

    fn obs_dim(&self) -> usize {
        self.spec.side * self.spec.side
    }

    fn max_steps(&self) -> usize {
        self.spec.max_steps
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = rng::seeded(seed, Stream::Environment);
        self.pos = self.spec.start;
        self.steps = 0;
        self.active = true;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if !self.active {
            return Err(Error::State("gridworld episode is over; call reset".into()));
        }
        check_action(action, 4)?;
        self.pos = grid_move(self.pos, action, self.spec.side);
        self.steps += 1;
        let at_goal = self.pos == self.spec.goal;
        let reward = if at_goal {
            self.spec.goal_reward
        } else {
            self.spec.step_reward
        };
        let done = at_goal || self.steps >= self.spec.max_steps;
        self.active = !done;
        Ok(Step {
            observation: self.observe(),
            reward,
            done,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScrollerSpec {
    pub width: usize,
    pub length: usize,
    pub density: f64,
    pub layout_seed: u64,
    /// Number of upcoming rows included in the observation.
    pub lookahead: usize,
}

impl Default for ScrollerSpec {
    fn default() -> Self {
        ScrollerSpec {
            width: 5,
            length: 40,
            density: 0.2,
            layout_seed: 0,
            lookahead: 2,
        }
    }
}

/// Vertical corridor that advances one row per step. Actions: left, stay, right.
///
/// Observation: one-hot of the agent's column, obstacle flags for the next
/// `lookahead` rows, then the row index divided by the corridor length. That
/// last component grows every step, so no observation repeats within an
/// episode. Surviving a row pays 1; hitting an obstacle ends the episode with 0.
#[derive(Clone, Debug)]
pub struct Scroller {
    spec: ScrollerSpec,
    /// `obstacles[row][col]`; row 0 is the empty start row.
    obstacles: Vec<Vec<bool>>,
    row: usize,
    col: usize,
    active: bool,
}

const MAX_LAYOUT_ATTEMPTS: usize = 10_000;

impl Scroller {
    /// Draws obstacle layouts from the layout seed until one is passable.
    pub fn new(spec: ScrollerSpec) -> Result<Self> {
        if spec.width == 0 {
            return Err(Error::config("width", "must be at least 1"));
        }
        if spec.length == 0 {
            return Err(Error::config("length", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&spec.density) {
            return Err(Error::config("density", "must be in [0, 1)"));
        }
        let mut rng = rng::seeded(spec.layout_seed, Stream::Layout);
        let start = spec.width / 2;
        for _ in 0..MAX_LAYOUT_ATTEMPTS {
            let mut obstacles = vec![vec![false; spec.width]];
            for _ in 0..spec.length {
                obstacles.push(
                    (0..spec.width)
                        .map(|_| rng.random::<f64>() < spec.density)
                        .collect(),
                );
            }
            if passable(&obstacles, start) {
                return Ok(Scroller {
                    spec,
                    obstacles,
                    row: 0,
                    col: start,
                    active: false,
                });
            }
        }
        Err(Error::config("density", "no passable layout found"))
    }

    pub fn spec(&self) -> &ScrollerSpec {
        &self.spec
    }

    pub fn obstacles(&self) -> &[Vec<bool>] {
        &self.obstacles
    }

    pub fn start_column(&self) -> usize {
        self.spec.width / 2
    }

    fn observe(&self) -> Vec<f64> {
        let w = self.spec.width;
        let mut obs = vec![0.0; self.obs_dim()];
        obs[self.col] = 1.0;
        for ahead in 1..=self.spec.lookahead {
            if let Some(row) = self.obstacles.get(self.row + ahead) {
                for (c, &blocked) in row.iter().enumerate() {
                    if blocked {
                        obs[w * ahead + c] = 1.0;
                    }
                }
            }
        }
        obs[w * (1 + self.spec.lookahead)] = self.row as f64 / self.spec.length as f64;
        obs
    }
}

/// Whether some left/stay/right path from `start` on row 0 reaches the last row.
fn passable(obstacles: &[Vec<bool>], start: usize) -> bool {
    let width = obstacles[0].len();
    let mut reachable = vec![false; width];
    reachable[start] = true;
    for row in &obstacles[1..] {
        let mut next = vec![false; width];
        for c in (0..width).filter(|&c| reachable[c]) {
            for nc in [c.saturating_sub(1), c, (c + 1).min(width - 1)] {
                if !row[nc] {
                    next[nc] = true;
                }
            }
        }
        if !next.contains(&true) {
            return false;
        }
        reachable = next;
    }
    true
}

impl Environment for Scroller {
    fn num_actions(&self) -> usize {
        3
    }

    fn obs_dim(&self) -> usize {
        self.spec.width * (1 + self.spec.lookahead) + 1
    }

    fn max_steps(&self) -> usize {
        self.spec.length
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.row = 0;
        self.col = self.start_column();
        self.active = true;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if !self.active {
            return Err(Error::State("scroller episode is over; call reset".into()));
        }
        check_action(action, 3)?;
        self.col = match action {
            0 => self.col.saturating_sub(1),
            1 => self.col,
            _ => (self.col + 1).min(self.spec.width - 1),
        };
        self.row += 1;
        let crashed = self.obstacles[self.row][self.col];
        let done = crashed || self.row >= self.spec.length;
        self.active = !done;
        Ok(Step {
            observation: self.observe(),
            reward: if crashed { 0.0 } else { 1.0 },
            done,
        })
    }
}
