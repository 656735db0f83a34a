//! Step sizes and contraction factor of the two-variable deterministic
//! iteration.

use crate::error::{Error, Result};
use crate::linalg::COND_LIMIT;

use super::KeyMatrices;

/// Constants of the linear-rate regime.
///
/// Extremal values of the non-symmetric key matrix are taken as singular
/// values throughout (for the symmetric positive-definite M they coincide
/// with eigenvalues).
#[derive(Debug, Clone, Copy)]
pub struct RateConstants {
    pub nu: f64,
    pub alpha_star: f64,
    pub beta_star: f64,
    /// `1 - 1/(12 kappa^3(M) kappa^4(A))`
    pub contraction: f64,
    pub kappa_m: f64,
    pub kappa_a: f64,
    pub sigma_max_a: f64,
    pub sigma_min_a: f64,
    pub sigma_max_m: f64,
    pub sigma_min_m: f64,
}

pub fn rate_constants(km: &KeyMatrices) -> Result<RateConstants> {
    let sv_a = km.a().clone().singular_values();
    let sv_m = km.m().clone().singular_values();
    let (sigma_max_a, sigma_min_a) = (sv_a.max(), sv_a.min());
    let (sigma_max_m, sigma_min_m) = (sv_m.max(), sv_m.min());
    if sigma_min_a <= 0.0 || sigma_max_a / sigma_min_a > COND_LIMIT {
        return Err(Error::Singular {
            what: "A",
            cond: if sigma_min_a > 0.0 {
                sigma_max_a / sigma_min_a
            } else {
                f64::INFINITY
            },
            limit: COND_LIMIT,
        });
    }
    if sigma_min_m <= 0.0 || sigma_max_m / sigma_min_m > COND_LIMIT {
        return Err(Error::RankDeficientM);
    }
    let kappa_a = sigma_max_a / sigma_min_a;
    let kappa_m = sigma_max_m / sigma_min_m;
    let nu = 2.0 * kappa_a * kappa_a * kappa_m * sigma_max_a / sigma_min_m;
    let alpha_star = sigma_min_m
        / ((sigma_max_m + sigma_min_m)
            * (sigma_max_a * sigma_max_a / sigma_min_m + nu * sigma_max_a));
    let beta_star = 2.0 / (sigma_max_m + sigma_min_m);
    let contraction = 1.0 - 1.0 / (12.0 * kappa_m.powi(3) * kappa_a.powi(4));
    Ok(RateConstants {
        nu,
        alpha_star,
        beta_star,
        contraction,
        kappa_m,
        kappa_a,
        sigma_max_a,
        sigma_min_a,
        sigma_max_m,
        sigma_min_m,
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::{DMatrix, DVector};

    use super::*;
    use crate::analysis::{KeyMatrices, Provenance};

    fn km(a: DMatrix<f64>, m: DMatrix<f64>) -> KeyMatrices {
        let p = a.nrows();
        KeyMatrices::new(a, DVector::zeros(p), m, 0.5, 0.9, Provenance::Analytic).unwrap()
    }

    #[test]
    fn identity_case() {
        let r =
            rate_constants(&km(DMatrix::identity(2, 2) * -1.0, DMatrix::identity(2, 2))).unwrap();
        assert!((r.kappa_a - 1.0).abs() < 1e-14);
        assert!((r.kappa_m - 1.0).abs() < 1e-14);
        assert!((r.nu - 2.0).abs() < 1e-14);
        assert!((r.alpha_star - 1.0 / 6.0).abs() < 1e-14);
        assert!((r.beta_star - 1.0).abs() < 1e-14);
        assert!((r.contraction - (1.0 - 1.0 / 12.0)).abs() < 1e-14);
    }

    #[test]
    fn nu_matches_hand_formula_on_symmetric_instance() {
        // symmetric negative definite A with known singular values 2 and 0.5
        let a = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -0.5]);
        let r = rate_constants(&km(a, DMatrix::identity(2, 2))).unwrap();
        let kappa = 4.0;
        assert!((r.nu - 2.0 * kappa * kappa * 1.0 * 2.0 / 1.0).abs() < 1e-12);
        assert!(r.contraction > 0.0 && r.contraction < 1.0);
    }

    #[test]
    fn singular_a_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(rate_constants(&km(a, DMatrix::identity(2, 2))).is_err());
    }
}
