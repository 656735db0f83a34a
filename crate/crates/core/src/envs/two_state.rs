//! Two-state counterexample MDP.
//!
//! States s1, s2 with actions right, left. Right moves to s2 (self-loop at
//! s2), left moves to s1 (self-loop at s1). The behavior policy plays right
//! with probability 1/2 everywhere, the target policy always plays right,
//! and the four pairs (s1,right),(s2,right),(s1,left),(s2,left) carry the
//! fixed features (1,0),(2,0),(0,1),(0,2) in that row order.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::features::FeatureMap;
use crate::mdp::{FiniteMdp, PairOrder, Policy};

use super::{EpisodeMode, TabularEnv};

pub const RIGHT: usize = 0;
pub const LEFT: usize = 1;

#[derive(Debug, Clone)]
pub struct TwoStateSpec {
    pub gamma: f64,
    pub lambda: f64,
    /// Expected rewards in row order (s1,right),(s2,right),(s1,left),(s2,left).
    /// The counterexample itself needs none; fixed-point experiments may
    /// override.
    pub rewards: [f64; 4],
    /// Steps per accounting block for the continuing stream.
    pub episode_len: usize,
}

impl TwoStateSpec {
    pub fn new(gamma: f64, lambda: f64) -> Self {
        Self {
            gamma,
            lambda,
            rewards: [0.0; 4],
            episode_len: 20,
        }
    }

    pub fn with_rewards(mut self, rewards: [f64; 4]) -> Self {
        self.rewards = rewards;
        self
    }

    /// Row order matching the published 4x4 transition matrix.
    pub fn pair_order() -> PairOrder {
        PairOrder::from_rows(2, 2, vec![(0, RIGHT), (1, RIGHT), (0, LEFT), (1, LEFT)])
            .expect("fixed two-state order")
    }

    /// Exact tabular export: (MDP, target, behavior, features).
    pub fn as_finite_mdp(&self) -> Result<(FiniteMdp, Policy, Policy, FeatureMap)> {
        // transition tensor flat [s][a][s']: right from s1 -> s2, left -> s1,
        // right from s2 -> s2, left -> s1
        let t = vec![
            0.0, 1.0, // (s1, right)
            1.0, 0.0, // (s1, left)
            0.0, 1.0, // (s2, right)
            1.0, 0.0, // (s2, left)
        ];
        // rewards arrive in pair-row order; the MDP table is [s][a]
        let reward = vec![
            self.rewards[0],
            self.rewards[2],
            self.rewards[1],
            self.rewards[3],
        ];
        let mdp = FiniteMdp::new(2, 2, t, reward, self.gamma, None)?;
        let pi = Policy::stationary_rows(2, &[1.0, 0.0])?;
        let mu = Policy::stationary_rows(2, &[0.5, 0.5])?;
        let phi = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 2.0, 0.0, 0.0, 1.0, 0.0, 2.0]);
        let features = FeatureMap::new(Self::pair_order(), phi, Some(2.0))?;
        Ok((mdp, pi, mu, features))
    }

    pub fn build_env(&self) -> Result<TabularEnv> {
        let (mdp, pi, mu, features) = self.as_finite_mdp()?;
        TabularEnv::new(
            mdp,
            pi,
            mu,
            features,
            EpisodeMode::Continuing {
                block: self.episode_len,
            },
            self.lambda,
        )
    }
}
