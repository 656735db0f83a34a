//! Worst-case constants implied by the boundedness assumptions on features,
//! rewards, and importance ratios.
//!
//! These feed two consumers: the noise-term constants reported next to the
//! Lyapunov diagnostics, and the constant of the decaying step-size schedule
//! over bounded primal/dual domains. The mixing-time offset tau and the
//! second drift constant have no closed form here and are reported as not
//! computable.

use crate::error::{Error, Result};
use crate::linalg;

use super::{KeyMatrices, LyapunovSystem};

/// Declared uniform bounds: |phi| <= phi_max componentwise, |R| <= r_max,
/// rho <= rho_max.
#[derive(Debug, Clone, Copy)]
pub struct AssumptionBounds {
    pub phi_max: f64,
    pub r_max: f64,
    pub rho_max: f64,
}

/// Constants chained from [`AssumptionBounds`].
#[derive(Debug, Clone)]
pub struct BoundChain {
    /// `p sqrt(p) phi_max^2`, operator-norm bound on the Gram estimate.
    pub c_m: f64,
    /// `phi_max / (1 - gamma*lambda*rho_max)`, trace norm bound; only finite
    /// when the decayed ratio stays below one.
    pub c_e: f64,
    /// `r_max * c_e`
    pub c_b: f64,
    /// `(1 + gamma) * c_e * phi_max`
    pub c_a: f64,
    /// `||M^-1||_op`, evaluated from the actual Gram matrix.
    pub c_m_inv: f64,
    /// drift constant independent of the step-size ratio
    pub c1: f64,
    /// drift constant multiplying beta/alpha
    pub c2: f64,
    /// `c1 + (beta/alpha) c2`
    pub zeta: f64,
    /// `c_b / c2`
    pub c_b_tilde: f64,
    /// weighting fraction `w2 / (w1 + w2)` from the Lyapunov blocks; `None`
    /// when no Lyapunov system was supplied.
    pub kappa1: Option<f64>,
    /// not computable from declared quantities
    pub kappa2: Option<f64>,
    /// mixing-time offset; existential only, never numeric
    pub tau: Option<f64>,
}

impl BoundChain {
    pub fn compute(
        bounds: AssumptionBounds,
        km: &KeyMatrices,
        beta_over_alpha: f64,
        lyapunov: Option<&LyapunovSystem>,
    ) -> Result<Self> {
        let AssumptionBounds {
            phi_max,
            r_max,
            rho_max,
        } = bounds;
        let gamma = km.gamma();
        let lambda = km.lambda();
        let decay = gamma * lambda * rho_max;
        if decay >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "trace bound requires gamma*lambda*rho_max < 1, got {decay}"
            )));
        }
        let p = km.dim() as f64;
        let c_m = p * p.sqrt() * phi_max * phi_max;
        let c_e = phi_max / (1.0 - decay);
        let c_b = r_max * c_e;
        let c_a = (1.0 + gamma) * c_e * phi_max;
        let sv = km.m().clone().singular_values();
        if sv.min() <= 0.0 {
            return Err(Error::RankDeficientM);
        }
        let c_m_inv = 1.0 / sv.min();
        let c1 = 2.0 * c_a * c_a * c_m_inv + c_a + c_a.powi(3) * c_m_inv * c_m_inv;
        let c2 = c_a + c_m * c_m_inv * c_a + c_m;
        let zeta = c1 + beta_over_alpha * c2;
        let c_b_tilde = c_b / c2;
        let kappa1 = lyapunov.map(|sys| sys.w2 / (sys.w1 + sys.w2));
        Ok(Self {
            c_m,
            c_e,
            c_b,
            c_a,
            c_m_inv,
            c1,
            c2,
            zeta,
            c_b_tilde,
            kappa1,
            kappa2: None,
            tau: None,
        })
    }

    /// Operator-norm bound check helper used by tests: the actual key matrix
    /// must sit inside the declared envelope.
    pub fn envelope_holds(&self, km: &KeyMatrices) -> bool {
        linalg::operator_norm(km.a()) <= self.c_a + 1e-9
            && km.b().norm() <= self.c_b + 1e-9
            && linalg::operator_norm(km.m()) <= self.c_m + 1e-9
    }
}
