//! Quadratic Lyapunov certificate for the two-timescale iteration.
//!
//! With `H = -A' M^-1 A` and `L = 2A`, the pair of equations
//!
//! ```text
//! -H' Q1 - Q1 H = I        M' Q2 + Q2 M = I
//! ```
//!
//! has unique symmetric positive-definite solutions whenever M and -H have
//! spectra in the open right half-plane. The block weighting
//!
//! ```text
//! Q = blockdiag(w1 Q1, w2 Q2) / (w1 + w2),
//! w1 = ||Q1 A'||_op,  w2 = ||Q2 M^-1 A L||_op
//! ```
//!
//! turns `L(z) = z' Q z` into the run diagnostic evaluated on
//! `z = (theta - theta*, rho - rho*)` with `rho = omega - M^-1 A theta`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

use super::KeyMatrices;

const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LyapunovSystem {
    /// `-A' M^-1 A`
    pub h: DMatrix<f64>,
    /// `2A`
    pub l: DMatrix<f64>,
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    /// 2p x 2p block-diagonal weighting.
    pub q: DMatrix<f64>,
    /// `||Q1 A'||_op`
    pub w1: f64,
    /// `||Q2 M^-1 A L||_op`
    pub w2: f64,
}

pub fn lyapunov_system(km: &KeyMatrices) -> Result<LyapunovSystem> {
    let p = km.dim();
    let m_inv = linalg::inverse(km.m(), "M").map_err(|_| Error::RankDeficientM)?;
    let h = -(km.a().transpose() * &m_inv * km.a());
    let l = km.a() * 2.0;

    let eig_m = linalg::eigenvalues(km.m(), "M")?;
    if eig_m.iter().any(|v| v.re <= 0.0) {
        return Err(Error::NotPositiveStable(
            "M has an eigenvalue with non-positive real part",
        ));
    }
    let eig_neg_h = linalg::eigenvalues(&(-&h), "-H")?;
    if eig_neg_h.iter().any(|v| v.re <= 0.0) {
        return Err(Error::NotPositiveStable(
            "-H has an eigenvalue with non-positive real part",
        ));
    }

    // -H'Q1 - Q1 H = I  <=>  (-H)'Q1 + Q1(-H) = I
    let q1 = linalg::sylvester_symmetric(&(-&h), &DMatrix::identity(p, p), "Q1 equation")?;
    let q2 = linalg::sylvester_symmetric(km.m(), &DMatrix::identity(p, p), "Q2 equation")?;

    for (name, (s, q)) in [("Q1", (-&h, &q1)), ("Q2", (km.m().clone(), &q2))] {
        let residual = linalg::max_abs(&(s.transpose() * q + q * s - DMatrix::identity(p, p)));
        if residual > LYAPUNOV_RESIDUAL_TOL {
            return Err(Error::InvalidConfig(format!(
                "{name} residual {residual:.3e} exceeds {LYAPUNOV_RESIDUAL_TOL:.1e}"
            )));
        }
        let min_eig = linalg::symmetric_eigenvalues(q)[0];
        if min_eig <= 0.0 {
            return Err(Error::NotPositiveStable(
                "Lyapunov solution is not positive definite",
            ));
        }
    }

    let w1 = linalg::operator_norm(&(&q1 * km.a().transpose()));
    let w2 = linalg::operator_norm(&(&q2 * &m_inv * km.a() * &l));
    let total = w1 + w2;
    let mut q = DMatrix::zeros(2 * p, 2 * p);
    q.view_mut((0, 0), (p, p)).copy_from(&(&q1 * (w1 / total)));
    q.view_mut((p, p), (p, p)).copy_from(&(&q2 * (w2 / total)));

    Ok(LyapunovSystem {
        h,
        l,
        q1,
        q2,
        q,
        w1,
        w2,
    })
}

/// Evaluate the Lyapunov diagnostic at one iterate pair.
pub fn lyapunov_value(
    sys: &LyapunovSystem,
    km: &KeyMatrices,
    theta: &DVector<f64>,
    omega: &DVector<f64>,
    theta_star: &DVector<f64>,
    omega_star: &DVector<f64>,
) -> Result<f64> {
    let p = km.dim();
    for (what, v) in [
        ("theta", theta),
        ("omega", omega),
        ("theta_star", theta_star),
        ("omega_star", omega_star),
    ] {
        if v.len() != p {
            return Err(Error::DimensionMismatch {
                context: "lyapunov_value",
                expected: p,
                got: v.len(),
            });
        }
        let _ = what;
    }
    let m_inv_a = linalg::solve_matrix(km.m(), km.a(), "M").map_err(|_| Error::RankDeficientM)?;
    let rho = omega - &m_inv_a * theta;
    let rho_star = omega_star - &m_inv_a * theta_star;
    let mut z = DVector::zeros(2 * p);
    z.rows_mut(0, p).copy_from(&(theta - theta_star));
    z.rows_mut(p, p).copy_from(&(rho - rho_star));
    Ok(z.dot(&(&sys.q * &z)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{KeyMatrices, Provenance};

    fn km(a: DMatrix<f64>, m: DMatrix<f64>) -> KeyMatrices {
        let p = a.nrows();
        KeyMatrices::new(a, DVector::zeros(p), m, 0.5, 0.9, Provenance::Analytic).unwrap()
    }

    #[test]
    fn identity_m_gives_half_identity_q2() {
        let sys =
            lyapunov_system(&km(DMatrix::identity(2, 2) * -1.0, DMatrix::identity(2, 2))).unwrap();
        assert!(linalg::max_abs(&(&sys.q2 - DMatrix::identity(2, 2) * 0.5)) < 1e-12);
        // here H = -A'A = -I as well, so Q1 = I/2 too
        assert!(linalg::max_abs(&(&sys.q1 - DMatrix::identity(2, 2) * 0.5)) < 1e-12);
    }

    #[test]
    fn random_stable_instance_residuals() {
        let mut seedval = 7_u64;
        let mut next = || {
            seedval = seedval
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seedval >> 11) as f64) / ((1_u64 << 53) as f64) - 0.5
        };
        for _ in 0..10 {
            let p = 4;
            let r = DMatrix::from_fn(p, p, |_, _| next());
            let m = &r * r.transpose() + DMatrix::<f64>::identity(p, p) * 0.5;
            let a = DMatrix::from_fn(p, p, |_, _| next()) - DMatrix::<f64>::identity(p, p) * 1.5;
            let sys = lyapunov_system(&km(a.clone(), m.clone())).unwrap();
            let ident = DMatrix::<f64>::identity(p, p);
            let r1 = linalg::max_abs(&(-(sys.h.transpose()) * &sys.q1 - &sys.q1 * &sys.h - &ident));
            let r2 = linalg::max_abs(&(m.transpose() * &sys.q2 + &sys.q2 * &m - &ident));
            assert!(r1 <= 1e-8, "Q1 residual {r1}");
            assert!(r2 <= 1e-8, "Q2 residual {r2}");
            assert!(linalg::symmetric_eigenvalues(&sys.q1)[0] > 0.0);
            assert!(linalg::symmetric_eigenvalues(&sys.q2)[0] > 0.0);
        }
    }

    #[test]
    fn value_is_zero_at_the_fixed_point_and_matches_double_loop() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -2.0]);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.2, 0.2, 1.0]);
        let km = km(a, m);
        let sys = lyapunov_system(&km).unwrap();
        let star = DVector::from_column_slice(&[0.4, -0.7]);
        let omega_star = DVector::zeros(2);
        let at_star = lyapunov_value(&sys, &km, &star, &omega_star, &star, &omega_star).unwrap();
        assert!(at_star.abs() < 1e-14);

        let theta = DVector::from_column_slice(&[1.0, 2.0]);
        let omega = DVector::from_column_slice(&[-0.5, 0.25]);
        let v = lyapunov_value(&sys, &km, &theta, &omega, &star, &omega_star).unwrap();
        assert!(v >= 0.0);

        // elementwise oracle
        let m_inv_a = km.m().clone().lu().solve(km.a()).unwrap();
        let rho = &omega - &m_inv_a * &theta;
        let rho_star = &omega_star - &m_inv_a * &star;
        let z = [
            theta[0] - star[0],
            theta[1] - star[1],
            rho[0] - rho_star[0],
            rho[1] - rho_star[1],
        ];
        let mut expect = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                expect += z[i] * sys.q[(i, j)] * z[j];
            }
        }
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_m_is_rejected() {
        let a = DMatrix::identity(2, 2) * -1.0;
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            lyapunov_system(&km(a, m)),
            Err(Error::RankDeficientM)
        ));
    }
}
