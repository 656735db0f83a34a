//! Shared instance generators and independent oracles for the integration
//! suites.
#![allow(dead_code)] // each suite uses its own subset

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use ges_lab::analysis::{self, KeyMatrices};
use ges_lab::features::FeatureMap;
use ges_lab::mdp::{self, FiniteMdp, PairOrder, Policy};

pub struct Instance {
    pub mdp: FiniteMdp,
    pub pi: Policy,
    pub mu: Policy,
    pub features: FeatureMap,
    pub lambda: f64,
}

impl Instance {
    pub fn key_matrices(&self) -> ges_lab::Result<KeyMatrices> {
        analysis::key_matrices(&self.mdp, &self.pi, &self.mu, &self.features, self.lambda)
    }
}

fn random_kernel(rng: &mut ChaCha8Rng, ns: usize, na: usize, sharpness: f64) -> Vec<f64> {
    let mut tensor = vec![0.0; ns * na * ns];
    for sa in 0..ns * na {
        let mut sum = 0.0;
        for s2 in 0..ns {
            let v: f64 = (rng.gen::<f64>() + 0.02).powf(sharpness);
            tensor[sa * ns + s2] = v;
            sum += v;
        }
        for s2 in 0..ns {
            tensor[sa * ns + s2] /= sum;
        }
    }
    tensor
}

fn random_policy(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> Policy {
    let mut rows = Vec::new();
    for _ in 0..ns {
        let mut row: Vec<f64> = (0..na).map(|_| rng.gen::<f64>() + 0.05).collect();
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= sum);
        rows.push(row);
    }
    Policy::from_rows(rows).unwrap()
}

/// Generic random ergodic instance: soft kernel, interior policies, random
/// full-rank features, gamma away from 1. Almost always spectrally stable.
pub fn random_instance(rng: &mut ChaCha8Rng, max_states: usize, max_actions: usize) -> Instance {
    loop {
        let ns = rng.gen_range(2..=max_states);
        let na = rng.gen_range(2..=max_actions);
        let n = ns * na;
        let tensor = random_kernel(rng, ns, na, 1.0);
        let rewards: Vec<f64> = (0..ns * na).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let gamma = rng.gen_range(0.3..0.95);
        let mdp = FiniteMdp::new(ns, na, tensor, rewards, gamma, None).unwrap();
        let pi = random_policy(rng, ns, na);
        let mu = random_policy(rng, ns, na);
        let p = rng.gen_range(2..=n.min(5));
        let matrix = DMatrix::from_fn(n, p, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        if matrix.rank(1e-9) < p {
            continue;
        }
        let features = FeatureMap::new(PairOrder::canonical(ns, na), matrix, None).unwrap();
        let lambda = rng.gen_range(0.0..1.0);
        return Instance {
            mdp,
            pi,
            mu,
            features,
            lambda,
        };
    }
}

/// Off-policy-skewed instance: near-deterministic kernel, deterministic
/// target vs uniform behavior, aliased low-dimensional features, gamma and
/// lambda near one. A few percent of draws are spectrally unstable.
pub fn adversarial_instance(rng: &mut ChaCha8Rng) -> Instance {
    loop {
        let ns = rng.gen_range(2..=5);
        let na = rng.gen_range(2..=3);
        let n = ns * na;
        let tensor = random_kernel(rng, ns, na, 8.0);
        let gamma = rng.gen_range(0.9..0.999);
        let mdp = FiniteMdp::new(ns, na, tensor, vec![0.0; n], gamma, None).unwrap();
        let mut pi_rows = vec![vec![0.0; na]; ns];
        for row in pi_rows.iter_mut() {
            row[rng.gen_range(0..na)] = 1.0;
        }
        let pi = Policy::from_rows(pi_rows).unwrap();
        let mu = Policy::uniform(ns, na);
        let p = rng.gen_range(2..=3.min(n));
        let matrix = DMatrix::from_fn(n, p, |_, _| (rng.gen::<f64>() * 3.0 - 1.5).round());
        if matrix.rank(1e-9) < p {
            continue;
        }
        let features = FeatureMap::new(PairOrder::canonical(ns, na), matrix, None).unwrap();
        let lambda = rng.gen_range(0.5..1.0);
        return Instance {
            mdp,
            pi,
            mu,
            features,
            lambda,
        };
    }
}

/// The two-state counterexample family at discounts near the divergence
/// boundary; unstable exactly when gamma > 5/(6 - lambda).
pub fn two_state_instance(rng: &mut ChaCha8Rng) -> Instance {
    let gamma = rng.gen_range(0.95..0.9999);
    let lambda = rng.gen_range(0.9..1.0);
    let spec = ges_lab::envs::TwoStateSpec::new(gamma, lambda);
    let (mdp, pi, mu, features) = spec.as_finite_mdp().unwrap();
    Instance {
        mdp,
        pi,
        mu,
        features,
        lambda,
    }
}

/// Projected-Bellman objective evaluated from first principles, independent
/// of the quadratic form: 0.5 ||Phi theta - Proj B_lambda(Phi theta)||^2_Xi
/// with Proj = Phi (Phi'Xi Phi)^-1 Phi'Xi and
/// B_lambda q = q + (I - lambda*gamma*P)^-1 (R + gamma*P q - q).
pub fn mspbe_projected_oracle(instance: &Instance, theta: &DVector<f64>) -> f64 {
    let Instance {
        mdp,
        pi,
        mu,
        features,
        lambda,
    } = instance;
    let order = features.order();
    let n = order.len();
    let gamma = mdp.gamma();
    let p_pi = mdp::state_action_transition(mdp, pi, order).unwrap();
    let xi = mdp::stationary_distribution(mdp, mu, order)
        .unwrap()
        .xi_matrix();
    let phi = features.matrix();
    let q = phi * theta;
    let bellman = mdp.reward_vector(order) + &p_pi * &q * gamma;
    let shrink = DMatrix::<f64>::identity(n, n) - &p_pi * (gamma * lambda);
    let multi_step = &q + shrink.lu().solve(&(&bellman - &q)).unwrap();
    let gram = phi.transpose() * &xi * phi;
    let proj = phi
        * gram
            .clone()
            .lu()
            .solve(&(phi.transpose() * &xi * &multi_step))
            .unwrap();
    let diff = &q - proj;
    0.5 * diff.dot(&(&xi * &diff))
}
