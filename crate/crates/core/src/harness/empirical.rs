//! Monte-Carlo estimation: key matrices from their unbiased per-step
//! estimators, and the normalized value-error against simulated returns.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{KeyMatrices, Provenance};
use crate::envs::{sample_categorical, Environment, EpisodeMode, TabularEnv};
use crate::error::{Error, Result};
use rand::Rng;

/// Running means of the per-step estimators over `n_episodes` episodes of
/// the environment's stream:
///
/// ```text
/// e_t = lambda*gamma*rho_t e_{t-1} + phi_t
/// A^_t = e_t (gamma*phibar_{t+1} - phi_t)'
/// b^_t = R_{t+1} e_t
/// M^_t = phi_t phi_t'
/// ```
///
/// The trace follows the same episode structure the learner would see.
/// Provenance is tagged Monte-Carlo and never mixed with analytic matrices.
pub fn empirical_key_matrices<E: Environment>(
    env: &E,
    lambda: f64,
    n_episodes: usize,
    seed: u64,
) -> Result<KeyMatrices> {
    if n_episodes == 0 {
        return Err(Error::EmptySeries("empirical_key_matrices"));
    }
    let p = env.feature_dim();
    let gamma = env.gamma();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = DVector::<f64>::zeros(p);
    let mut a_sum = DMatrix::<f64>::zeros(p, p);
    let mut b_sum = DVector::<f64>::zeros(p);
    let mut m_diag_updates: Vec<(usize, usize, f64)> = Vec::new();
    let mut m_sum = DMatrix::<f64>::zeros(p, p);
    let mut steps = 0u64;

    let mode = env.episode_mode();
    for _ in 0..n_episodes {
        let mut s = env.reset(&mut rng);
        if !matches!(mode, EpisodeMode::Continuing { .. }) {
            trace.fill(0.0);
        }
        for _ in 0..mode.steps_per_episode() {
            let tr = env.step(&s, &mut rng);
            trace *= lambda * gamma * tr.rho;
            trace += &tr.phi;
            // A^ += e (gamma*phibar - phi)', accumulated column-sparse
            accumulate_outer(
                &mut a_sum,
                &trace,
                &tr.phi,
                &tr.expected_phi_next,
                gamma,
                tr.terminal,
            );
            if tr.reward != 0.0 {
                b_sum.axpy(tr.reward, &trace, 1.0);
            }
            // M^ += phi phi', sparse in both directions
            m_diag_updates.clear();
            for (i, &x) in tr.phi.iter().enumerate() {
                if x != 0.0 {
                    for (j, &y) in tr.phi.iter().enumerate() {
                        if y != 0.0 {
                            m_diag_updates.push((i, j, x * y));
                        }
                    }
                }
            }
            for &(i, j, v) in &m_diag_updates {
                m_sum[(i, j)] += v;
            }
            steps += 1;
            let terminal = tr.terminal;
            s = tr.next_state;
            if terminal {
                break;
            }
        }
    }
    let n = steps as f64;
    let m = &m_sum / n;
    // the sample Gram mean is symmetric by construction up to round-off
    let m = (&m + m.transpose()) * 0.5;
    KeyMatrices::new(
        a_sum / n,
        b_sum / n,
        m,
        lambda,
        gamma,
        Provenance::MonteCarlo,
    )
}

/// `a_sum += e * (gamma*phibar - phi)'`, touching only nonzero columns.
fn accumulate_outer(
    a_sum: &mut DMatrix<f64>,
    trace: &DVector<f64>,
    phi: &DVector<f64>,
    phibar: &DVector<f64>,
    gamma: f64,
    terminal: bool,
) {
    let boot = if terminal { 0.0 } else { gamma };
    for j in 0..phi.len() {
        let g = boot * phibar[j] - phi[j];
        if g != 0.0 {
            for i in 0..trace.len() {
                let e = trace[i];
                if e != 0.0 {
                    a_sum[(i, j)] += e * g;
                }
            }
        }
    }
}

/// Outcome of the normalized value-error measurement. When the simulated
/// returns are all zero the published ratio is undefined; the fallback
/// reports the unnormalized weighted parameter norm and says so.
#[derive(Debug, Clone, Copy)]
pub struct MseOutcome {
    pub value: f64,
    /// False when the zero-return fallback was taken.
    pub normalized: bool,
}

/// Normalized mean square value error
/// `||Phi theta - q^||^2_Xi / ||q^||^2_Xi`, with `q^` the Monte-Carlo
/// estimate of the target-policy returns from every start pair, weighted by
/// the behavior stationary distribution.
///
/// `horizon` must cover the discount tail: `gamma^horizon <= 1e-6`.
pub fn empirical_mse(
    env: &TabularEnv,
    theta: &DVector<f64>,
    n_rollouts: usize,
    horizon: usize,
    seed: u64,
) -> Result<MseOutcome> {
    let gamma = env.mdp().gamma();
    let min_horizon = ((1e-6_f64).ln() / gamma.ln()).ceil() as usize;
    if horizon < min_horizon {
        return Err(Error::InvalidConfig(format!(
            "horizon {horizon} leaves a discount tail above 1e-6; need at least {min_horizon}"
        )));
    }
    if n_rollouts == 0 {
        return Err(Error::EmptySeries("empirical_mse"));
    }
    let order = env.features().order();
    let xi = crate::mdp::stationary_distribution(env.mdp(), env.behavior(), order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut q_hat = DVector::<f64>::zeros(order.len());
    for row in 0..order.len() {
        let (s0, a0) = order.pair_at(row);
        let mut total = 0.0;
        for _ in 0..n_rollouts {
            total += rollout_return(env, s0, a0, horizon, &mut rng);
        }
        q_hat[row] = total / n_rollouts as f64;
    }

    let predicted = env.features().matrix() * theta;
    let mut num = 0.0;
    let mut den = 0.0;
    for row in 0..order.len() {
        let w = xi.xi()[row];
        let d = predicted[row] - q_hat[row];
        num += w * d * d;
        den += w * q_hat[row] * q_hat[row];
    }
    if den <= 1e-300 {
        let unnormalized = (0..order.len())
            .map(|r| xi.xi()[r] * predicted[r] * predicted[r])
            .sum();
        return Ok(MseOutcome {
            value: unnormalized,
            normalized: false,
        });
    }
    Ok(MseOutcome {
        value: num / den,
        normalized: true,
    })
}

/// One discounted target-policy rollout started from a forced (s, a).
fn rollout_return(
    env: &TabularEnv,
    s0: usize,
    a0: usize,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mdp = env.mdp();
    let pi = env.target();
    let gamma = mdp.gamma();
    let mut s = s0;
    let mut a = a0;
    let mut discount = 1.0;
    let mut ret = 0.0;
    for _ in 0..horizon {
        ret += discount * mdp.expected_reward(s, a);
        let s_next = sample_categorical(
            (0..mdp.n_states()).map(|s2| mdp.transition_prob(s, a, s2)),
            rng.gen::<f64>(),
        );
        if mdp.is_terminal(s_next) {
            break;
        }
        a = sample_categorical(
            (0..mdp.n_actions()).map(|a2| pi.prob(s_next, a2)),
            rng.gen::<f64>(),
        );
        s = s_next;
        discount *= gamma;
    }
    ret
}
