//! Generic tabular environment: a finite MDP plus behavior/target policies
//! and a feature map, streamed under the behavior policy.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::AssumptionBounds;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::learners::Transition;
use crate::mdp::{self, FiniteMdp, Policy};

use super::{sample_categorical, Environment, EpisodeMode};

#[derive(Debug, Clone)]
pub struct TabularEnv {
    mdp: FiniteMdp,
    pi: Policy,
    mu: Policy,
    features: FeatureMap,
    mode: EpisodeMode,
    default_lambda: f64,
    r_max: f64,
    rho_max: f64,
}

impl TabularEnv {
    pub fn new(
        mdp: FiniteMdp,
        pi: Policy,
        mu: Policy,
        features: FeatureMap,
        mode: EpisodeMode,
        default_lambda: f64,
    ) -> Result<Self> {
        mdp::require_coverage(&pi, &mu)?;
        if features.order().n_states() != mdp.n_states()
            || features.order().n_actions() != mdp.n_actions()
        {
            return Err(Error::DimensionMismatch {
                context: "tabular env features vs MDP",
                expected: mdp.n_states() * mdp.n_actions(),
                got: features.order().len(),
            });
        }
        let mut r_max = 0.0_f64;
        let mut rho_max = 0.0_f64;
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                r_max = r_max.max(mdp.expected_reward(s, a).abs());
                if mu.prob(s, a) > 0.0 {
                    rho_max = rho_max.max(pi.prob(s, a) / mu.prob(s, a));
                }
            }
        }
        Ok(Self {
            mdp,
            pi,
            mu,
            features,
            mode,
            default_lambda,
            r_max,
            rho_max,
        })
    }

    pub fn mdp(&self) -> &FiniteMdp {
        &self.mdp
    }

    pub fn target(&self) -> &Policy {
        &self.pi
    }

    pub fn behavior(&self) -> &Policy {
        &self.mu
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }
}

/// Sample one transition from `state` under the behavior policy: action from
/// mu, next state from the kernel, importance ratio and feature fields
/// filled, the expected next feature summed exactly under the target policy.
pub fn sample_transition(
    env: &TabularEnv,
    state: usize,
    rng: &mut ChaCha8Rng,
) -> Transition<usize> {
    let mdp = &env.mdp;
    let a = sample_categorical(
        (0..mdp.n_actions()).map(|a| env.mu.prob(state, a)),
        rng.gen::<f64>(),
    );
    let s_next = sample_categorical(
        (0..mdp.n_states()).map(|s2| mdp.transition_prob(state, a, s2)),
        rng.gen::<f64>(),
    );
    Transition {
        state,
        action: a,
        reward: mdp.expected_reward(state, a),
        next_state: s_next,
        rho: env.pi.prob(state, a) / env.mu.prob(state, a),
        phi: env.features.phi(state, a),
        expected_phi_next: env.features.expected_phi(&env.pi, s_next),
        terminal: false,
    }
}

impl Environment for TabularEnv {
    type State = usize;

    fn feature_dim(&self) -> usize {
        self.features.dim()
    }

    fn gamma(&self) -> f64 {
        self.mdp.gamma()
    }

    fn default_lambda(&self) -> f64 {
        self.default_lambda
    }

    fn episode_mode(&self) -> EpisodeMode {
        self.mode
    }

    fn bounds(&self) -> AssumptionBounds {
        AssumptionBounds {
            phi_max: self.features.phi_max(),
            r_max: self.r_max,
            rho_max: self.rho_max,
        }
    }

    fn reset(&self, rng: &mut ChaCha8Rng) -> usize {
        rng.gen_range(0..self.mdp.n_states())
    }

    fn step(&self, state: &usize, rng: &mut ChaCha8Rng) -> Transition<usize> {
        sample_transition(self, *state, rng)
    }
}
