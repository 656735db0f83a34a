//! Benchmark environments as transition-stream generators under a behavior
//! policy.
//!
//! Specs are immutable; sampling takes an explicitly passed RNG, so
//! concurrent runs never share randomness.

mod baird;
mod mountain_car;
mod tabular;
mod two_state;

pub use baird::{BairdStarSpec, DASHED, SOLID};
pub use mountain_car::{
    mountain_car_step, McState, MountainCarSpec, TileCoder, ACTION_LEFT, ACTION_NEUTRAL,
    ACTION_RIGHT,
};
pub use tabular::{sample_transition, TabularEnv};
pub use two_state::{TwoStateSpec, LEFT, RIGHT};

use rand_chacha::ChaCha8Rng;

use crate::analysis::AssumptionBounds;
use crate::learners::Transition;

/// How episode boundaries arise for a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeMode {
    /// No boundaries: one unbroken chain; an "episode" is purely an
    /// accounting block of this many steps.
    Continuing { block: usize },
    /// Restart from the start distribution every `len` steps, resetting the
    /// trace; transitions are never terminal (the value bootstrap continues
    /// through restarts).
    FixedRestart { len: usize },
    /// Episodes end at genuinely terminal transitions (bootstrap zeroed),
    /// with a step cap as a safety net.
    Terminal { cap: usize },
}

impl EpisodeMode {
    pub fn steps_per_episode(&self) -> usize {
        match *self {
            EpisodeMode::Continuing { block } => block,
            EpisodeMode::FixedRestart { len } => len,
            EpisodeMode::Terminal { cap } => cap,
        }
    }
}

/// A transition-stream generator: draw a start state, then sample steps
/// under the behavior policy.
pub trait Environment {
    type State: Clone;

    /// Feature dimension p.
    fn feature_dim(&self) -> usize;

    fn gamma(&self) -> f64;

    /// The trace decay the environment was described with; runs may
    /// override it.
    fn default_lambda(&self) -> f64;

    fn episode_mode(&self) -> EpisodeMode;

    /// Declared uniform bounds for this stream.
    fn bounds(&self) -> AssumptionBounds;

    /// Draw an episode start state.
    fn reset(&self, rng: &mut ChaCha8Rng) -> Self::State;

    /// Sample one step under the behavior policy from `state`.
    fn step(&self, state: &Self::State, rng: &mut ChaCha8Rng) -> Transition<Self::State>;
}

/// Draw from a categorical distribution given by `probs` (assumed to sum to
/// one) using a single uniform variate.
pub(crate) fn sample_categorical(probs: impl Iterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
