//! Expected off-line iteration on the two-state counterexample: the
//! divergence demonstration.

use nalgebra::DVector;

use crate::analysis::{self, KeyMatrices};
use crate::envs::TwoStateSpec;
use crate::error::Result;
use crate::learners::offline_expected_step;

pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Divergent,
    Stable,
}

#[derive(Debug, Clone)]
pub struct DivergenceReport {
    pub regime: Regime,
    /// |theta_{t,1}| for t = 0..len
    pub first_component: Vec<f64>,
    /// First step at which |theta_{t,1}| exceeds 1e6, if reached.
    pub crossing_step: Option<usize>,
    /// Closed-form first diagonal entry of the key matrix (the eigenvalue
    /// driving the first component).
    pub eigenvalue: f64,
    /// Expected per-step growth factor `1 + alpha * eigenvalue`.
    pub growth_factor: f64,
    pub key_matrices: KeyMatrices,
}

/// Closed-form first diagonal entry of the two-state key matrix under the
/// normalized quarter-mass stationary weighting.
pub fn two_state_eigenvalue(gamma: f64, lambda: f64) -> f64 {
    (6.0 * gamma - gamma * lambda - 5.0) / (4.0 * (1.0 - gamma * lambda))
}

/// The first component stays positive in the divergent regime exactly when
/// `gamma > 5 / (6 - lambda)`.
pub fn divergent_regime(gamma: f64, lambda: f64) -> bool {
    gamma > 5.0 / (6.0 - lambda)
}

/// Iterate the expected off-line update from `theta_0 = (1, 0)` on the
/// zero-reward two-state instance and record the first-component curve.
pub fn divergence_demo(
    gamma: f64,
    lambda: f64,
    alpha: f64,
    t_max: usize,
) -> Result<DivergenceReport> {
    let spec = TwoStateSpec::new(gamma, lambda);
    let (mdp, pi, mu, features) = spec.as_finite_mdp()?;
    let km = analysis::key_matrices(&mdp, &pi, &mu, &features, lambda)?;
    let eigenvalue = two_state_eigenvalue(gamma, lambda);
    let regime = if divergent_regime(gamma, lambda) {
        Regime::Divergent
    } else {
        Regime::Stable
    };

    let mut theta: DVector<f64> = DVector::from_column_slice(&[1.0, 0.0]);
    let mut first_component = Vec::with_capacity(t_max + 1);
    first_component.push(theta[0].abs());
    let mut crossing_step = None;
    for t in 1..=t_max {
        theta = offline_expected_step(&theta, &km, alpha);
        first_component.push(theta[0].abs());
        if crossing_step.is_none() && theta[0].abs() > DIVERGENCE_THRESHOLD {
            crossing_step = Some(t);
            break;
        }
    }
    Ok(DivergenceReport {
        regime,
        first_component,
        crossing_step,
        eigenvalue,
        growth_factor: 1.0 + alpha * eigenvalue,
        key_matrices: km,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergent_regime_grows_geometrically() {
        let report = divergence_demo(0.999, 0.99, 0.1, 10_000).unwrap();
        assert_eq!(report.regime, Regime::Divergent);
        let c = report.eigenvalue;
        assert!(c > 0.0);
        // per-step ratio equals 1 + alpha*c
        for w in report.first_component.windows(2).take(500) {
            let ratio = w[1] / w[0];
            assert!((ratio - (1.0 + 0.1 * c)).abs() < 1e-10, "ratio {ratio}");
        }
        // crossing at the analytically predicted step
        let predicted = ((DIVERGENCE_THRESHOLD.ln()) / (1.0 + 0.1 * c).ln()).ceil() as usize;
        assert_eq!(report.crossing_step, Some(predicted));
    }

    #[test]
    fn stable_regime_decays_to_zero() {
        let report = divergence_demo(0.9, 0.99, 0.1, 2_000).unwrap();
        assert_eq!(report.regime, Regime::Stable);
        assert!(report.crossing_step.is_none());
        assert!(report.eigenvalue < 0.0);
        assert!(*report.first_component.last().unwrap() < 1e-10);
    }

    #[test]
    fn zero_first_component_stays_zero() {
        // theta0 = (0, x) keeps the first component at zero: the key matrix
        // is lower-triangular, so iterate directly
        let spec = TwoStateSpec::new(0.999, 0.99);
        let (mdp, pi, mu, features) = spec.as_finite_mdp().unwrap();
        let km = analysis::key_matrices(&mdp, &pi, &mu, &features, 0.99).unwrap();
        let mut theta = DVector::from_column_slice(&[0.0, 5.0]);
        for _ in 0..100 {
            theta = offline_expected_step(&theta, &km, 0.1);
            assert_eq!(theta[0], 0.0);
        }
    }
}
