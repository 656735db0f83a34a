//! The iterative algorithms: the online stochastic learner, the exact
//! deterministic saddle-point iteration, and the expected off-line update.

mod gap;
mod run;
mod schedule;

pub use gap::{primal_dual_gap, psi};
pub use run::{
    averaged_iterates, run_episodes, DiagnosticContext, DiagnosticRecord, DiagnosticSeries,
    RunSettings,
};
pub use schedule::{appendix_e_constant, make_schedule, ScheduleSpec, StepSizeSchedule};

use nalgebra::DVector;

use crate::analysis::KeyMatrices;
use crate::error::{Error, Result};

/// Any parameter or trace component beyond this magnitude flags the run as
/// diverged; divergence is an outcome, not a crash, so blow-up curves stay
/// recordable.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Mutable state of one learner run.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub theta: DVector<f64>,
    pub omega: DVector<f64>,
    pub trace: DVector<f64>,
    /// steps taken so far
    pub t: u64,
    /// step index at which a non-finite or oversized component first
    /// appeared, if any
    pub diverged_at: Option<u64>,
}

impl LearnerState {
    /// All-zero start; the trace starts at zero at every episode boundary.
    pub fn zeros(p: usize) -> Self {
        Self {
            theta: DVector::zeros(p),
            omega: DVector::zeros(p),
            trace: DVector::zeros(p),
            t: 0,
            diverged_at: None,
        }
    }

    pub fn with_theta(theta: DVector<f64>) -> Self {
        let p = theta.len();
        Self {
            theta,
            ..Self::zeros(p)
        }
    }

    pub fn reset_trace(&mut self) {
        self.trace.fill(0.0);
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    fn check_divergence(&mut self) {
        if self.diverged_at.is_some() {
            return;
        }
        let bad = |v: &DVector<f64>| {
            v.iter()
                .any(|x| !x.is_finite() || x.abs() > DIVERGENCE_LIMIT)
        };
        if bad(&self.theta) || bad(&self.omega) || bad(&self.trace) {
            self.diverged_at = Some(self.t);
        }
    }
}

/// One sampled step under the behavior policy.
///
/// The sampler also draws the next action (the stream is action-to-action),
/// but the expected-update learner marginalizes the next action under the
/// target policy, so only the expected next feature is carried.
#[derive(Debug, Clone)]
pub struct Transition<S> {
    pub state: S,
    pub action: usize,
    pub reward: f64,
    pub next_state: S,
    /// importance ratio pi(a|s) / mu(a|s)
    pub rho: f64,
    pub phi: DVector<f64>,
    /// `sum_a' pi(a'|s') phi(s', a')`
    pub expected_phi_next: DVector<f64>,
    pub terminal: bool,
}

/// One online stochastic update.
///
/// ```text
/// e      <- lambda*gamma*rho * e + phi
/// delta  <- r + gamma*theta'phibar' - theta'phi     (phibar' = 0 when terminal)
/// omega  <- omega + beta * (e*delta - phi (phi'omega))
/// theta  <- theta - alpha * (gamma*phibar' - phi) (e'omega_before)
/// ```
///
/// The theta update reads the omega value from before the omega update. The
/// trace resets to zero after a terminal transition.
pub fn ges_step<S>(
    state: &mut LearnerState,
    tr: &Transition<S>,
    alpha: f64,
    beta: f64,
    gamma: f64,
    lambda: f64,
) -> Result<()> {
    let p = state.theta.len();
    if tr.phi.len() != p || tr.expected_phi_next.len() != p {
        return Err(Error::DimensionMismatch {
            context: "ges_step features",
            expected: p,
            got: tr.phi.len(),
        });
    }
    debug_assert!(alpha > 0.0 && beta > 0.0);
    debug_assert!(tr.rho >= 0.0);

    state.trace *= lambda * gamma * tr.rho;
    state.trace += &tr.phi;

    let bootstrap = if tr.terminal {
        0.0
    } else {
        gamma * state.theta.dot(&tr.expected_phi_next)
    };
    let delta = tr.reward + bootstrap - state.theta.dot(&tr.phi);

    let trace_dot_omega = state.trace.dot(&state.omega);
    let phi_dot_omega = tr.phi.dot(&state.omega);

    // omega <- omega + beta (e*delta - phi phi' omega)
    let mut omega_next = state.omega.clone();
    omega_next.axpy(beta * delta, &state.trace, 1.0);
    omega_next.axpy(-beta * phi_dot_omega, &tr.phi, 1.0);

    // theta <- theta - alpha (gamma*phibar - phi) e'omega, pre-update omega
    if !tr.terminal {
        state
            .theta
            .axpy(-alpha * gamma * trace_dot_omega, &tr.expected_phi_next, 1.0);
    }
    state.theta.axpy(alpha * trace_dot_omega, &tr.phi, 1.0);

    state.omega = omega_next;
    state.t += 1;
    if tr.terminal {
        state.reset_trace();
    }
    state.check_divergence();
    Ok(())
}

/// One exact deterministic saddle-point step using the analytic key
/// matrices:
///
/// ```text
/// omega <- omega + beta (A theta + b - M omega)
/// theta <- theta - alpha A' omega_before
/// ```
pub fn expected_saddle_step(
    state: &mut LearnerState,
    km: &KeyMatrices,
    alpha: f64,
    beta: f64,
) -> Result<()> {
    let p = km.dim();
    if state.theta.len() != p {
        return Err(Error::DimensionMismatch {
            context: "expected_saddle_step state",
            expected: p,
            got: state.theta.len(),
        });
    }
    let omega_next = &state.omega + (km.residual(&state.theta) - km.m() * &state.omega) * beta;
    state.theta -= km.a().tr_mul(&state.omega) * alpha;
    state.omega = omega_next;
    state.t += 1;
    state.check_divergence();
    Ok(())
}

/// Expected off-line update `theta + alpha (A theta + b)`.
pub fn offline_expected_step(theta: &DVector<f64>, km: &KeyMatrices, alpha: f64) -> DVector<f64> {
    theta + km.residual(theta) * alpha
}
