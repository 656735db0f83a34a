//! State-action feature maps in matrix form.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::{PairOrder, Policy};

/// Linear feature map phi(s,a) with its matrix form Phi, whose row `i` is
/// `phi(order.pair_at(i))'`.
///
/// `phi_max` is the declared infinity-norm bound on individual feature
/// vectors; construction rejects a matrix that exceeds it.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    matrix: DMatrix<f64>,
    order: PairOrder,
    phi_max: f64,
}

impl FeatureMap {
    pub fn new(order: PairOrder, matrix: DMatrix<f64>, phi_max: Option<f64>) -> Result<Self> {
        if matrix.nrows() != order.len() {
            return Err(Error::DimensionMismatch {
                context: "FeatureMap rows vs pair order",
                expected: order.len(),
                got: matrix.nrows(),
            });
        }
        let observed = matrix.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let phi_max = match phi_max {
            Some(declared) => {
                if observed > declared {
                    return Err(Error::PhiMaxViolated { declared, observed });
                }
                declared
            }
            None => observed,
        };
        Ok(Self {
            matrix,
            order,
            phi_max,
        })
    }

    /// Tabular features: Phi = I over the pair enumeration.
    pub fn identity(order: PairOrder) -> Self {
        let n = order.len();
        Self {
            matrix: DMatrix::identity(n, n),
            order,
            phi_max: 1.0,
        }
    }

    /// Feature dimension p.
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn order(&self) -> &PairOrder {
        &self.order
    }

    pub fn phi_max(&self) -> f64 {
        self.phi_max
    }

    pub fn phi(&self, s: usize, a: usize) -> DVector<f64> {
        self.matrix.row(self.order.row_of(s, a)).transpose()
    }

    /// Expected feature of the next pair under a policy:
    /// `sum_a pi(a|s) phi(s,a)`.
    pub fn expected_phi(&self, pi: &Policy, s: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for a in 0..self.order.n_actions() {
            let w = pi.prob(s, a);
            if w > 0.0 {
                out.axpy(w, &self.phi(s, a), 1.0);
            }
        }
        out
    }
}
