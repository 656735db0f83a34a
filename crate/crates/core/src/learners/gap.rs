//! Saddle objective and primal-dual gap over bounded domains.

use nalgebra::DVector;

use crate::analysis::{self, KeyMatrices};
use crate::error::{Error, Result};
use crate::linalg;

/// Saddle objective `Psi(theta, omega) = (A theta + b)'omega - 0.5 ||omega||_M^2`.
pub fn psi(km: &KeyMatrices, theta: &DVector<f64>, omega: &DVector<f64>) -> f64 {
    km.residual(theta).dot(omega) - 0.5 * omega.dot(&(km.m() * omega))
}

const PROJECTED_ASCENT_TOL: f64 = 1e-10;
const PROJECTED_ASCENT_MAX_ITERS: usize = 200_000;

/// Primal-dual gap `max_{omega'} Psi(theta, omega') - min_{theta'} Psi(theta', omega)`
/// over origin-centered balls of the given radii.
///
/// The max is closed-form at `M^-1(A theta + b)` when that point lies inside
/// the omega ball, otherwise a projected gradient ascent on the strongly
/// concave quadratic (tolerance 1e-10). The min of the term linear in
/// `theta'` is attained on the boundary along `-A'omega`. Errors out when
/// the saddle point lies outside the declared domain.
pub fn primal_dual_gap(
    km: &KeyMatrices,
    theta: &DVector<f64>,
    omega: &DVector<f64>,
    radius_theta: f64,
    radius_omega: f64,
) -> Result<f64> {
    if radius_theta <= 0.0 || radius_omega <= 0.0 {
        return Err(Error::InvalidConfig("gap radii must be positive".into()));
    }
    let theta_star = analysis::td_fixed_point(km)?;
    let omega_star = km.omega_bar(&theta_star)?;
    if theta_star.norm() > radius_theta || omega_star.norm() > radius_omega {
        return Err(Error::DomainTooSmall {
            detail: format!(
                "||theta*|| = {:.3e} vs radius {radius_theta}, ||omega*|| = {:.3e} vs radius {radius_omega}",
                theta_star.norm(),
                omega_star.norm()
            ),
        });
    }

    let max_term = {
        let omega_bar = km.omega_bar(theta)?;
        if omega_bar.norm() <= radius_omega {
            psi(km, theta, &omega_bar)
        } else {
            psi(
                km,
                theta,
                &ball_constrained_argmax(km, theta, radius_omega)?,
            )
        }
    };

    let min_term = {
        let grad = km.a().tr_mul(omega);
        let norm = grad.norm();
        let linear_min = if norm > 0.0 {
            -radius_theta * norm
        } else {
            0.0
        };
        linear_min + km.b().dot(omega) - 0.5 * omega.dot(&(km.m() * omega))
    };

    Ok(max_term - min_term)
}

/// Projected gradient ascent for `max (A theta + b)'w - 0.5 w'Mw` over
/// `||w|| <= radius`; step 1/lambda_max(M) contracts for the strongly
/// concave objective.
fn ball_constrained_argmax(
    km: &KeyMatrices,
    theta: &DVector<f64>,
    radius: f64,
) -> Result<DVector<f64>> {
    let c = km.residual(theta);
    let step = 1.0
        / linalg::symmetric_eigenvalues(km.m())
            .last()
            .copied()
            .unwrap_or(1.0);
    let mut w = &c * (radius / c.norm());
    for _ in 0..PROJECTED_ASCENT_MAX_ITERS {
        let grad = &c - km.m() * &w;
        let mut next = &w + grad * step;
        let n = next.norm();
        if n > radius {
            next *= radius / n;
        }
        let moved = (&next - &w).norm();
        w = next;
        if moved <= PROJECTED_ASCENT_TOL {
            return Ok(w);
        }
    }
    Err(Error::EigenFailure("projected ascent on the omega ball"))
}
