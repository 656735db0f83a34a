//! Small dense linear-algebra helpers shared by the analysis pipeline.
//!
//! Everything here targets desk-scale problems (p up to a few dozen); all
//! solves are dense with an explicit condition-number gate instead of a
//! silent pseudo-inverse.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition threshold separating "solvable" from "singular" everywhere in
/// the crate.
pub const COND_LIMIT: f64 = 1e12;

/// Condition estimate sigma_max / sigma_min.
pub fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Largest singular value (operator norm).
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

/// LU solve `m x = rhs` gated on the condition estimate.
pub fn solve(m: &DMatrix<f64>, rhs: &DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
    let cond = condition_estimate(m);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(Error::Singular {
            what,
            cond,
            limit: COND_LIMIT,
        });
    }
    m.clone().lu().solve(rhs).ok_or(Error::Singular {
        what,
        cond: f64::INFINITY,
        limit: COND_LIMIT,
    })
}

/// LU solve with a matrix right-hand side.
pub fn solve_matrix(
    m: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
    what: &'static str,
) -> Result<DMatrix<f64>> {
    let cond = condition_estimate(m);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(Error::Singular {
            what,
            cond,
            limit: COND_LIMIT,
        });
    }
    m.clone().lu().solve(rhs).ok_or(Error::Singular {
        what,
        cond: f64::INFINITY,
        limit: COND_LIMIT,
    })
}

/// Inverse gated on the condition estimate.
pub fn inverse(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    solve_matrix(m, &DMatrix::identity(m.nrows(), m.ncols()), what)
}

/// Full complex spectrum of a real square matrix.
///
/// Exactly triangular inputs (the expected-update map `I + alpha*A` can even
/// be all zero) read their spectrum off the diagonal; everything else goes
/// through a Schur decomposition with a bounded iteration budget, so a
/// non-converging solve surfaces as an error instead of spinning.
pub fn eigenvalues(m: &DMatrix<f64>, what: &'static str) -> Result<Vec<Complex<f64>>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch {
            context: "eigenvalues",
            expected: n,
            got: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenFailure(what));
    }
    let lower_zero = (0..n).all(|j| (j + 1..n).all(|i| m[(i, j)] == 0.0));
    let upper_zero = (0..n).all(|i| (i + 1..n).all(|j| m[(i, j)] == 0.0));
    if lower_zero || upper_zero {
        return Ok((0..n).map(|i| Complex::new(m[(i, i)], 0.0)).collect());
    }
    let schur = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or(Error::EigenFailure(what))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Spectral radius max |lambda|.
pub fn spectral_radius(m: &DMatrix<f64>, what: &'static str) -> Result<f64> {
    Ok(eigenvalues(m, what)?
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Moore-Penrose pseudo-inverse with a relative singular-value cutoff.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eps = 1e-12 * operator_norm(m).max(1.0);
    m.clone()
        .pseudo_inverse(eps)
        .expect("SVD failed on a finite matrix")
}

/// Solve `s' q + q s = w` for `q` by Kronecker vectorization.
///
/// Unique solution exists when no two eigenvalues of `s` sum to zero; callers
/// gate on positive stability which implies that. Dense p^2 x p^2 solve, so
/// this is a small-p tool.
pub fn sylvester_symmetric(
    s: &DMatrix<f64>,
    w: &DMatrix<f64>,
    what: &'static str,
) -> Result<DMatrix<f64>> {
    let p = s.nrows();
    let ident = DMatrix::<f64>::identity(p, p);
    let st = s.transpose();
    // vec(S' Q + Q S) = (I (x) S' + S' (x) I) vec(Q), column-major vec.
    let k = ident.kronecker(&st) + st.kronecker(&ident);
    let rhs = DVector::from_column_slice(w.as_slice());
    let sol = solve(&k, &rhs, what)?;
    let q = DMatrix::from_column_slice(p, p, sol.as_slice());
    // Symmetrize away round-off; the exact solution is symmetric for symmetric w.
    Ok((&q + q.transpose()) * 0.5)
}

/// Max absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}
