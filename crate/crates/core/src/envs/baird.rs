//! Seven-state star MDP with dashed/solid actions.
//!
//! The dashed action moves to one of the six upper states uniformly; the
//! solid action moves to the seventh state. The behavior policy plays
//! dashed with probability 6/7 and solid with 1/7 (making the next-state
//! distribution uniform), the target policy always plays solid, all rewards
//! are zero, and the discount is 0.99. Features are 16-dimensional: row
//! (s_i, dashed) has a 2 at column i and a 1 at column 8; row (s_i, solid)
//! has a 2 at column 8+i and a 1 at column 16 (1-based).

use nalgebra::DMatrix;

use crate::error::Result;
use crate::features::FeatureMap;
use crate::mdp::{FiniteMdp, PairOrder, Policy};

use super::{EpisodeMode, TabularEnv};

pub const DASHED: usize = 0;
pub const SOLID: usize = 1;

#[derive(Debug, Clone)]
pub struct BairdStarSpec {
    pub gamma: f64,
    pub lambda: f64,
    /// Episodes restart uniformly after this many steps; no termination rule
    /// exists, so a fixed length stands in for one.
    pub episode_len: usize,
}

impl Default for BairdStarSpec {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.99,
            episode_len: 20,
        }
    }
}

impl BairdStarSpec {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// All dashed rows first, then all solid rows, matching the block form
    /// of the published feature matrix.
    pub fn pair_order() -> PairOrder {
        let mut rows: Vec<(usize, usize)> = (0..7).map(|s| (s, DASHED)).collect();
        rows.extend((0..7).map(|s| (s, SOLID)));
        PairOrder::from_rows(7, 2, rows).expect("fixed star order")
    }

    pub fn feature_matrix() -> DMatrix<f64> {
        let mut phi = DMatrix::zeros(14, 16);
        for s in 0..7 {
            phi[(s, s)] = 2.0;
            phi[(s, 7)] = 1.0;
            phi[(7 + s, 8 + s)] = 2.0;
            phi[(7 + s, 15)] = 1.0;
        }
        phi
    }

    pub fn as_finite_mdp(&self) -> Result<(FiniteMdp, Policy, Policy, FeatureMap)> {
        let (ns, na) = (7, 2);
        let mut t = vec![0.0; ns * na * ns];
        for s in 0..ns {
            for s2 in 0..6 {
                t[(s * na + DASHED) * ns + s2] = 1.0 / 6.0;
            }
            t[(s * na + SOLID) * ns + 6] = 1.0;
        }
        let mdp = FiniteMdp::new(ns, na, t, vec![0.0; ns * na], self.gamma, None)?;
        let mut pi_rows = vec![vec![0.0; 2]; ns];
        let mut mu_rows = vec![vec![0.0; 2]; ns];
        for s in 0..ns {
            pi_rows[s][SOLID] = 1.0;
            mu_rows[s][DASHED] = 6.0 / 7.0;
            mu_rows[s][SOLID] = 1.0 / 7.0;
        }
        let pi = Policy::from_rows(pi_rows)?;
        let mu = Policy::from_rows(mu_rows)?;
        let features = FeatureMap::new(Self::pair_order(), Self::feature_matrix(), Some(2.0))?;
        Ok((mdp, pi, mu, features))
    }

    pub fn build_env(&self) -> Result<TabularEnv> {
        let (mdp, pi, mu, features) = self.as_finite_mdp()?;
        TabularEnv::new(
            mdp,
            pi,
            mu,
            features,
            EpisodeMode::FixedRestart {
                len: self.episode_len,
            },
            self.lambda,
        )
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::envs::Environment;
    use crate::mdp::{state_action_transition, stationary_distribution};

    #[test]
    fn feature_rows_have_exactly_two_nonzeros() {
        let phi = BairdStarSpec::feature_matrix();
        assert_eq!(phi.nrows(), 14);
        assert_eq!(phi.ncols(), 16);
        for r in 0..14 {
            let row = phi.row(r);
            let nz: Vec<f64> = row.iter().copied().filter(|&x| x != 0.0).collect();
            assert_eq!(nz.len(), 2, "row {r}");
            assert!(nz.contains(&2.0) && nz.contains(&1.0));
        }
    }

    #[test]
    fn target_transition_concentrates_on_state_seven_solid() {
        let spec = BairdStarSpec::default();
        let (mdp, pi, _, features) = spec.as_finite_mdp().unwrap();
        let p = state_action_transition(&mdp, &pi, features.order()).unwrap();
        let order = features.order();
        let col_7_solid = order.row_of(6, SOLID);
        for i in 0..14 {
            let (s, a) = order.pair_at(i);
            for j in 0..14 {
                let expected = if a == SOLID {
                    if j == col_7_solid {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    // dashed rows spread over the six upper states, next
                    // action always solid
                    let (s2, a2) = order.pair_at(j);
                    if a2 == SOLID && s2 < 6 {
                        1.0 / 6.0
                    } else {
                        0.0
                    }
                };
                assert!(
                    (p[(i, j)] - expected).abs() < 1e-15,
                    "row ({s},{a}) col {j}"
                );
            }
        }
    }

    #[test]
    fn behavior_stationary_is_uniform_over_states() {
        let spec = BairdStarSpec::default();
        let (mdp, _, mu, features) = spec.as_finite_mdp().unwrap();
        let sd = stationary_distribution(&mdp, &mu, features.order()).unwrap();
        let order = features.order();
        for i in 0..14 {
            let (_, a) = order.pair_at(i);
            let expected = if a == DASHED { 6.0 / 49.0 } else { 1.0 / 49.0 };
            assert!((sd.xi()[i] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn sampled_ratios_match_policies() {
        let spec = BairdStarSpec::default();
        let env = spec.build_env().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..64 {
            let s = env.reset(&mut rng);
            let tr = env.step(&s, &mut rng);
            if tr.action == SOLID {
                assert_eq!(tr.next_state, 6);
                assert!((tr.rho - 7.0).abs() < 1e-15);
            } else {
                assert!(tr.next_state < 6);
                assert_eq!(tr.rho, 0.0);
            }
            assert_eq!(tr.reward, 0.0);
        }
    }
}
