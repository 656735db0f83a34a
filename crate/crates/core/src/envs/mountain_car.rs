//! Mountain-car domain with grid tile coding.
//!
//! State box Velocity x Position = [-0.07, 0.07] x [-1.2, 0.6], actions
//! left/neutral/right. The behavior and target policies condition on the
//! velocity sign; features come from four 8x8 tilings offset diagonally by
//! a quarter tile each, one disjoint index block per action, giving 0/1
//! feature vectors with exactly four ones.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::AssumptionBounds;
use crate::learners::Transition;

use super::{sample_categorical, Environment, EpisodeMode};

pub const ACTION_LEFT: usize = 0;
pub const ACTION_NEUTRAL: usize = 1;
pub const ACTION_RIGHT: usize = 2;

pub const POSITION_MIN: f64 = -1.2;
pub const POSITION_MAX: f64 = 0.6;
pub const VELOCITY_MIN: f64 = -0.07;
pub const VELOCITY_MAX: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McState {
    pub position: f64,
    pub velocity: f64,
}

/// Grid tile coder: `tilings` square grids of `grid` x `grid` cells over the
/// state box, the i-th tiling shifted diagonally by i/tilings of a tile;
/// each action owns a disjoint block of indices.
#[derive(Debug, Clone)]
pub struct TileCoder {
    tilings: usize,
    grid: usize,
    n_actions: usize,
}

impl TileCoder {
    pub fn new(tilings: usize, grid: usize, n_actions: usize) -> Self {
        Self {
            tilings,
            grid,
            n_actions,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_actions * self.tilings * self.grid * self.grid
    }

    /// Active indices, one per tiling, for a clipped state and an action.
    pub fn active_indices(&self, position: f64, velocity: f64, action: usize) -> Vec<usize> {
        let position = position.clamp(POSITION_MIN, POSITION_MAX);
        let velocity = velocity.clamp(VELOCITY_MIN, VELOCITY_MAX);
        let w_pos = (POSITION_MAX - POSITION_MIN) / self.grid as f64;
        let w_vel = (VELOCITY_MAX - VELOCITY_MIN) / self.grid as f64;
        let per_tiling = self.grid * self.grid;
        let action_base = action * self.tilings * per_tiling;
        (0..self.tilings)
            .map(|i| {
                let shift = i as f64 / self.tilings as f64;
                let cx = (((position - POSITION_MIN) / w_pos + shift).floor() as usize)
                    .min(self.grid - 1);
                let cy = (((velocity - VELOCITY_MIN) / w_vel + shift).floor() as usize)
                    .min(self.grid - 1);
                action_base + i * per_tiling + cy * self.grid + cx
            })
            .collect()
    }

    pub fn feature_vector(&self, position: f64, velocity: f64, action: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        for idx in self.active_indices(position, velocity, action) {
            v[idx] = 1.0;
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct MountainCarSpec {
    pub gamma: f64,
    pub lambda: f64,
    pub coder: TileCoder,
    /// Step cap per episode as a safety net for unlucky starts.
    pub episode_cap: usize,
}

impl Default for MountainCarSpec {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.99,
            coder: TileCoder::new(4, 8, 3),
            episode_cap: 5_000,
        }
    }
}

impl MountainCarSpec {
    /// Velocity-conditional behavior policy.
    pub fn mu(&self, state: &McState) -> [f64; 3] {
        if state.velocity > 0.0 {
            [0.01, 0.01, 0.98]
        } else {
            [0.98, 0.01, 0.01]
        }
    }

    /// Velocity-conditional target policy.
    pub fn pi(&self, state: &McState) -> [f64; 3] {
        if state.velocity > 0.0 {
            [0.1, 0.1, 0.8]
        } else {
            [0.8, 0.1, 0.1]
        }
    }

    /// Expected feature of the next state under the target policy.
    pub fn expected_phi(&self, state: &McState) -> DVector<f64> {
        let pi = self.pi(state);
        let mut out = DVector::zeros(self.coder.dim());
        for (a, &w) in pi.iter().enumerate() {
            if w > 0.0 {
                for idx in self.coder.active_indices(state.position, state.velocity, a) {
                    out[idx] += w;
                }
            }
        }
        out
    }
}

/// Deterministic dynamics step:
/// velocity += 0.001*(action-1) - 0.0025*cos(3*position), clipped to the
/// box; position += velocity, clipped; per-step reward -1; hitting the left
/// wall zeroes the velocity; the goal at position >= 0.6 terminates.
pub fn mountain_car_step(state: &McState, action: usize) -> (McState, f64, bool) {
    let mut velocity =
        state.velocity + 0.001 * (action as f64 - 1.0) - 0.0025 * (3.0 * state.position).cos();
    velocity = velocity.clamp(VELOCITY_MIN, VELOCITY_MAX);
    let mut position = state.position + velocity;
    if position <= POSITION_MIN {
        position = POSITION_MIN;
        velocity = 0.0;
    }
    if position > POSITION_MAX {
        position = POSITION_MAX;
    }
    let terminal = position >= GOAL_POSITION;
    (McState { position, velocity }, -1.0, terminal)
}

impl Environment for MountainCarSpec {
    type State = McState;

    fn feature_dim(&self) -> usize {
        self.coder.dim()
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn default_lambda(&self) -> f64 {
        self.lambda
    }

    fn episode_mode(&self) -> EpisodeMode {
        EpisodeMode::Terminal {
            cap: self.episode_cap,
        }
    }

    fn bounds(&self) -> AssumptionBounds {
        AssumptionBounds {
            phi_max: 1.0,
            r_max: 1.0,
            rho_max: 10.0,
        }
    }

    fn reset(&self, rng: &mut ChaCha8Rng) -> McState {
        // standard start: random position near the valley floor, zero velocity
        McState {
            position: rng.gen_range(-0.6..-0.4),
            velocity: 0.0,
        }
    }

    fn step(&self, state: &McState, rng: &mut ChaCha8Rng) -> Transition<McState> {
        let mu = self.mu(state);
        let pi = self.pi(state);
        let action = sample_categorical(mu.iter().copied(), rng.gen::<f64>());
        let (next, reward, terminal) = mountain_car_step(state, action);
        Transition {
            state: *state,
            action,
            reward,
            next_state: next,
            rho: pi[action] / mu[action],
            phi: self
                .coder
                .feature_vector(state.position, state.velocity, action),
            expected_phi_next: self.expected_phi(&next),
            terminal,
        }
    }
}
