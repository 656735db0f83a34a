//! Analytic pipeline: key matrices, the projected-Bellman objective, TD
//! fixed points, stability and rate diagnostics, and Lyapunov machinery.

mod bounds;
mod lyapunov;
mod rates;
mod stability;

pub use bounds::{AssumptionBounds, BoundChain};
pub use lyapunov::{lyapunov_system, lyapunov_value, LyapunovSystem};
pub use rates::{rate_constants, RateConstants};
pub use stability::{stability_check, StabilityReport};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg;
use crate::mdp::{self, FiniteMdp, Policy};

/// How a set of key matrices was obtained. Analytic construction must be
/// symmetric to machine precision; Monte-Carlo estimates get a loose gate
/// and are never silently mixed with analytic ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    MonteCarlo,
}

impl Provenance {
    fn symmetry_tol(self) -> f64 {
        match self {
            Provenance::Analytic => 1e-12,
            Provenance::MonteCarlo => 1e-3,
        }
    }
}

/// The triple (A, b, M) driving every analytic and diagnostic computation:
///
/// * `A  = Phi' Xi (I - gamma*lambda*P_pi)^-1 (gamma*P_pi - I) Phi`
/// * `b  = Phi' Xi (I - gamma*lambda*P_pi)^-1 R`
/// * `M  = Phi' Xi Phi`
#[derive(Debug, Clone)]
pub struct KeyMatrices {
    a: DMatrix<f64>,
    b: DVector<f64>,
    m: DMatrix<f64>,
    lambda: f64,
    gamma: f64,
    provenance: Provenance,
}

impl KeyMatrices {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        m: DMatrix<f64>,
        lambda: f64,
        gamma: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        let p = a.nrows();
        if a.ncols() != p || m.nrows() != p || m.ncols() != p || b.len() != p {
            return Err(Error::DimensionMismatch {
                context: "KeyMatrices shapes",
                expected: p,
                got: m.nrows().max(b.len()),
            });
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidLambda(lambda));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidGamma(gamma));
        }
        let asym = linalg::max_abs(&(&m - m.transpose()));
        let scale = linalg::max_abs(&m).max(1.0);
        if asym > provenance.symmetry_tol() * scale {
            return Err(Error::InvalidConfig(format!(
                "M must be symmetric (asymmetry {asym:.3e} exceeds tolerance for {provenance:?} provenance)"
            )));
        }
        Ok(Self {
            a,
            b,
            m,
            lambda,
            gamma,
            provenance,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `A theta + b`.
    pub fn residual(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.a * theta + &self.b
    }

    /// Best response of the dual variable: `M^-1 (A theta + b)`.
    pub fn omega_bar(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        linalg::solve(&self.m, &self.residual(theta), "M").map_err(|_| Error::RankDeficientM)
    }
}

/// Which resolvent the trace follows when building the key matrix: the
/// target-policy chain (this crate's learner) or the behavior-policy chain
/// (the tree-backup style row of the fixed-point comparison table).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TraceChain {
    Target,
    Behavior,
}

fn key_matrices_for_chain(
    mdp: &FiniteMdp,
    pi: &Policy,
    mu: &Policy,
    features: &FeatureMap,
    lambda: f64,
    chain: TraceChain,
) -> Result<KeyMatrices> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    mdp::require_coverage(pi, mu)?;
    let order = features.order();
    let gamma = mdp.gamma();
    let p_pi = mdp::state_action_transition(mdp, pi, order)?;
    let xi = mdp::stationary_distribution(mdp, mu, order)?;
    let n = order.len();

    let resolvent_base = match chain {
        TraceChain::Target => p_pi.clone(),
        TraceChain::Behavior => mdp::state_action_transition(mdp, mu, order)?,
    };
    // (I - gamma*lambda*P) is strictly diagonally dominant for
    // gamma*lambda < 1 and stochastic P, hence invertible; the solve is
    // gated anyway.
    let shrink = DMatrix::<f64>::identity(n, n) - resolvent_base * (gamma * lambda);

    let drift = (&p_pi * gamma - DMatrix::<f64>::identity(n, n)) * features.matrix();
    let resolved_drift = linalg::solve_matrix(&shrink, &drift, "(I - gamma*lambda*P)")?;
    let resolved_reward =
        linalg::solve(&shrink, &mdp.reward_vector(order), "(I - gamma*lambda*P)")?;

    let mut weighted_phi_t = features.matrix().transpose();
    for (j, w) in xi.xi().iter().enumerate() {
        weighted_phi_t.column_mut(j).scale_mut(*w);
    }
    let a = &weighted_phi_t * resolved_drift;
    let b = &weighted_phi_t * resolved_reward;
    let m = &weighted_phi_t * features.matrix();
    // exact symmetrization of Phi' Xi Phi against round-off
    let m = (&m + m.transpose()) * 0.5;
    KeyMatrices::new(a, b, m, lambda, gamma, Provenance::Analytic)
}

/// Analytic key matrices for one MDP / policy pair / feature map.
pub fn key_matrices(
    mdp: &FiniteMdp,
    pi: &Policy,
    mu: &Policy,
    features: &FeatureMap,
    lambda: f64,
) -> Result<KeyMatrices> {
    key_matrices_for_chain(mdp, pi, mu, features, lambda, TraceChain::Target)
}

/// Mean square projected Bellman error `0.5 * ||A theta + b||^2` in the
/// M^-1 norm. Errors out when M is rank-deficient.
pub fn mspbe(km: &KeyMatrices, theta: &DVector<f64>) -> Result<f64> {
    if theta.len() != km.dim() {
        return Err(Error::DimensionMismatch {
            context: "mspbe theta",
            expected: km.dim(),
            got: theta.len(),
        });
    }
    let r = km.residual(theta);
    let sol = linalg::solve(&km.m, &r, "M").map_err(|_| Error::RankDeficientM)?;
    Ok(0.5 * r.dot(&sol))
}

/// MSPBE through the Moore-Penrose pseudo-inverse of M, for feature maps
/// whose Gram matrix is rank-deficient (the learner dynamics then live in
/// the feature span, where this is the exact objective). Kept separate from
/// [`mspbe`] so the strict rank contract stays visible.
pub fn mspbe_pseudo(km: &KeyMatrices, theta: &DVector<f64>) -> f64 {
    let r = km.residual(theta);
    let pinv = linalg::pseudo_inverse(&km.m);
    0.5 * r.dot(&(pinv * &r))
}

/// TD fixed point: the solution of `A theta + b = 0`.
pub fn td_fixed_point(km: &KeyMatrices) -> Result<DVector<f64>> {
    let theta = linalg::solve(&km.a, &(-&km.b), "A")?;
    debug_assert!(km.residual(&theta).amax() <= 1e-10 * km.b.amax().max(1.0));
    Ok(theta)
}

/// One row of the fixed-point comparison table.
#[derive(Debug)]
pub struct FixedPointRow {
    pub algorithm: &'static str,
    /// Solution, or the solvability error for a singular row matrix.
    pub theta: Result<DVector<f64>>,
    /// Infinity-norm residual of the row equation at the solution.
    pub residual: Option<f64>,
}

/// Fixed points of the two multi-step expectation models this crate covers:
/// the target-chain trace (GES row) and the behavior-chain trace (GTB row).
/// A singular row is reported per row instead of failing the table.
pub fn fixed_point_table(
    mdp: &FiniteMdp,
    pi: &Policy,
    mu: &Policy,
    features: &FeatureMap,
    lambda: f64,
) -> Result<Vec<FixedPointRow>> {
    let mut rows = Vec::new();
    for (name, chain) in [("GES", TraceChain::Target), ("GTB", TraceChain::Behavior)] {
        let km = key_matrices_for_chain(mdp, pi, mu, features, lambda, chain)?;
        let theta = td_fixed_point(&km);
        let residual = theta.as_ref().ok().map(|t| km.residual(t).amax());
        rows.push(FixedPointRow {
            algorithm: name,
            theta,
            residual,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::PairOrder;

    fn two_state(gamma: f64, rewards: [f64; 4]) -> (FiniteMdp, Policy, Policy, FeatureMap) {
        let t = vec![
            0.0, 1.0, 1.0, 0.0, //
            0.0, 1.0, 1.0, 0.0,
        ];
        // rewards given in pair order (s0,right),(s1,right),(s0,left),(s1,left)
        let reward = vec![rewards[0], rewards[2], rewards[1], rewards[3]];
        let mdp = FiniteMdp::new(2, 2, t, reward, gamma, None).unwrap();
        let pi = Policy::stationary_rows(2, &[1.0, 0.0]).unwrap();
        let mu = Policy::stationary_rows(2, &[0.5, 0.5]).unwrap();
        let order = PairOrder::from_rows(2, 2, vec![(0, 0), (1, 0), (0, 1), (1, 1)]).unwrap();
        let phi = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 2.0, 0.0, 0.0, 1.0, 0.0, 2.0]);
        let features = FeatureMap::new(order, phi, None).unwrap();
        (mdp, pi, mu, features)
    }

    /// Closed form of the two-state key matrix under the normalized
    /// stationary weighting xi = 1/4 (half the published half-identity
    /// weighting; scaling Xi scales A without moving eigenvalue signs).
    fn two_state_a_closed(gamma: f64, lambda: f64) -> DMatrix<f64> {
        let a00 = (6.0 * gamma - gamma * lambda - 5.0) / (4.0 * (1.0 - gamma * lambda));
        let a10 =
            3.0 * gamma * (1.0 - lambda) * (gamma * lambda + 1.0) / (4.0 * (1.0 - gamma * lambda));
        DMatrix::from_row_slice(2, 2, &[a00, 0.0, a10, -1.25])
    }

    #[test]
    fn two_state_key_matrix_matches_closed_form() {
        for (gamma, lambda) in [(0.999, 0.99), (0.9, 0.5), (0.5, 0.0), (0.7, 1.0)] {
            let (mdp, pi, mu, features) = two_state(gamma, [0.0; 4]);
            let km = key_matrices(&mdp, &pi, &mu, &features, lambda).unwrap();
            let expected = two_state_a_closed(gamma, lambda);
            assert!(
                linalg::max_abs(&(km.a() - &expected)) < 1e-12,
                "gamma={gamma} lambda={lambda}: {} vs {}",
                km.a(),
                expected
            );
            assert!(km.b().amax() < 1e-15);
            assert!(linalg::max_abs(&(km.m() - DMatrix::identity(2, 2) * 1.25)) < 1e-14);
        }
    }

    #[test]
    fn lambda_zero_tabular_reduces_to_xi_weighted_drift() {
        let t = vec![
            0.2, 0.8, 0.6, 0.4, //
            0.3, 0.7, 0.5, 0.5,
        ];
        let mdp = FiniteMdp::new(2, 2, t, vec![1.0, -0.5, 0.25, 2.0], 0.8, None).unwrap();
        let pi = Policy::from_rows(vec![vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let mu = Policy::uniform(2, 2);
        let order = PairOrder::canonical(2, 2);
        let features = FeatureMap::identity(order.clone());
        let km = key_matrices(&mdp, &pi, &mu, &features, 0.0).unwrap();

        let p_pi = mdp::state_action_transition(&mdp, &pi, &order).unwrap();
        let xi = mdp::stationary_distribution(&mdp, &mu, &order)
            .unwrap()
            .xi_matrix();
        let expect_a = &xi * (&p_pi * mdp.gamma() - DMatrix::<f64>::identity(4, 4));
        let expect_b = &xi * mdp.reward_vector(&order);
        assert!(linalg::max_abs(&(km.a() - expect_a)) < 1e-14);
        assert!((km.b() - expect_b).amax() < 1e-14);
        assert!(linalg::max_abs(&(km.m() - xi)) < 1e-14);
    }

    #[test]
    fn monte_carlo_average_of_estimators_matches_analytic_a() {
        // on-policy 3-state MDP: rho = 1, time-average of e_t (g*phibar - phi)'
        // over 10^6 stationary steps.
        let mut seedval = 99_u64;
        let mut next = || {
            seedval = seedval
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seedval >> 11) as f64) / ((1_u64 << 53) as f64)
        };
        let (ns, na) = (3, 2);
        let mut t = vec![0.0; ns * na * ns];
        for sa in 0..ns * na {
            let mut sum = 0.0;
            for s2 in 0..ns {
                let v = next() + 0.1;
                t[sa * ns + s2] = v;
                sum += v;
            }
            for s2 in 0..ns {
                t[sa * ns + s2] /= sum;
            }
        }
        let rewards: Vec<f64> = (0..ns * na).map(|_| next() * 2.0 - 1.0).collect();
        let mdp = FiniteMdp::new(ns, na, t, rewards, 0.9, None).unwrap();
        let mu = Policy::uniform(ns, na);
        let pi = mu.clone();
        let order = PairOrder::canonical(ns, na);
        let phi_rows: Vec<f64> = (0..ns * na * 2).map(|_| next() * 2.0 - 1.0).collect();
        let features = FeatureMap::new(
            order.clone(),
            DMatrix::from_row_slice(ns * na, 2, &phi_rows),
            None,
        )
        .unwrap();
        let lambda = 0.7;
        let km = key_matrices(&mdp, &pi, &mu, &features, lambda).unwrap();

        let gamma = mdp.gamma();
        let mut s = 0usize;
        let mut e = DVector::<f64>::zeros(2);
        let mut a_hat = DMatrix::<f64>::zeros(2, 2);
        let mut b_hat = DVector::<f64>::zeros(2);
        let steps = 1_000_000;
        for _ in 0..steps {
            let a = if next() < 0.5 { 0 } else { 1 };
            let u = next();
            let mut acc = 0.0;
            let mut s2 = ns - 1;
            for cand in 0..ns {
                acc += mdp.transition_prob(s, a, cand);
                if u < acc {
                    s2 = cand;
                    break;
                }
            }
            let phi = features.phi(s, a);
            let phibar = features.expected_phi(&pi, s2);
            e = &e * (lambda * gamma) + &phi;
            a_hat += &e * (phibar * gamma - &phi).transpose();
            b_hat += &e * mdp.expected_reward(s, a);
            s = s2;
        }
        a_hat /= steps as f64;
        b_hat /= steps as f64;
        let rel_a = linalg::max_abs(&(&a_hat - km.a())) / linalg::max_abs(km.a());
        let rel_b = (b_hat - km.b()).norm() / km.b().norm();
        assert!(rel_a < 0.02, "relative A error {rel_a}");
        assert!(rel_b < 0.02, "relative b error {rel_b}");
    }

    #[test]
    fn mspbe_scalar_case() {
        let km = KeyMatrices::new(
            DMatrix::from_row_slice(1, 1, &[-1.0]),
            DVector::from_column_slice(&[1.0]),
            DMatrix::from_row_slice(1, 1, &[2.0]),
            0.5,
            0.9,
            Provenance::Analytic,
        )
        .unwrap();
        let v = mspbe(&km, &DVector::from_column_slice(&[0.0])).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn mspbe_zero_at_fixed_point() {
        let (mdp, pi, mu, features) = two_state(0.9, [1.0, 0.0, 0.0, 0.0]);
        let km = key_matrices(&mdp, &pi, &mu, &features, 0.5).unwrap();
        let star = td_fixed_point(&km).unwrap();
        assert!(mspbe(&km, &star).unwrap() < 1e-10);
        assert!(km.residual(&star).amax() <= 1e-10);
    }

    #[test]
    fn mspbe_rejects_singular_m() {
        let km = KeyMatrices::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]),
            DVector::from_column_slice(&[1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            0.0,
            0.9,
            Provenance::Analytic,
        )
        .unwrap();
        assert!(matches!(
            mspbe(&km, &DVector::zeros(2)),
            Err(Error::RankDeficientM)
        ));
        // pseudo-inverse route still evaluates
        let v = mspbe_pseudo(&km, &DVector::zeros(2));
        assert!(v >= 0.0);
    }

    #[test]
    fn fixed_point_zero_rewards_is_zero() {
        let (mdp, pi, mu, features) = two_state(0.9, [0.0; 4]);
        let km = key_matrices(&mdp, &pi, &mu, &features, 0.5).unwrap();
        let star = td_fixed_point(&km).unwrap();
        assert!(star.amax() < 1e-12);
    }

    #[test]
    fn tabular_fixed_point_solves_bellman_equation() {
        let t = vec![
            0.2, 0.8, 0.6, 0.4, //
            0.3, 0.7, 0.5, 0.5,
        ];
        let mdp = FiniteMdp::new(2, 2, t, vec![1.0, -0.5, 0.25, 2.0], 0.8, None).unwrap();
        let pi = Policy::from_rows(vec![vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let mu = Policy::uniform(2, 2);
        let order = PairOrder::canonical(2, 2);
        let features = FeatureMap::identity(order.clone());
        for lambda in [0.0, 0.5, 0.9] {
            let km = key_matrices(&mdp, &pi, &mu, &features, lambda).unwrap();
            let star = td_fixed_point(&km).unwrap();
            // oracle: q^pi from the Bellman equation, independent of A and b
            let p_pi = mdp::state_action_transition(&mdp, &pi, &order).unwrap();
            let q = (DMatrix::<f64>::identity(4, 4) - p_pi * mdp.gamma())
                .lu()
                .solve(&mdp.reward_vector(&order))
                .unwrap();
            assert!((star - q).amax() < 1e-10, "lambda={lambda}");
        }
    }

    #[test]
    fn table_rows_coincide_when_lambda_zero_or_on_policy() {
        let (mdp, pi, mu, features) = two_state(0.9, [1.0, 0.0, 0.0, 0.0]);
        let rows = fixed_point_table(&mdp, &pi, &mu, &features, 0.0).unwrap();
        let ges = rows[0].theta.as_ref().unwrap();
        let gtb = rows[1].theta.as_ref().unwrap();
        assert!((ges - gtb).amax() < 1e-12);

        let rows = fixed_point_table(&mdp, &mu, &mu, &features, 0.7).unwrap();
        let ges = rows[0].theta.as_ref().unwrap();
        let gtb = rows[1].theta.as_ref().unwrap();
        assert!((ges - gtb).amax() < 1e-12);
    }

    #[test]
    fn table_rows_differ_off_policy_with_traces() {
        let (mdp, pi, mu, features) = two_state(0.9, [1.0, 0.0, 0.0, 0.0]);
        let rows = fixed_point_table(&mdp, &pi, &mu, &features, 0.5).unwrap();
        let ges = rows[0].theta.as_ref().unwrap();
        let gtb = rows[1].theta.as_ref().unwrap();
        assert!((ges - gtb).amax() > 1e-3, "GES {ges} vs GTB {gtb}");
        for row in &rows {
            assert!(row.residual.unwrap() <= 1e-10);
        }
    }
}
