//! Shared second-order system container for the train and bridge models.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VtsiError};
use crate::linalg::relative_asymmetry;

/// Tolerance on the relative asymmetry of `M` and `K` accepted at
/// construction time.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A linear second-order system `M ü + C u̇ + K u = P` over a set of free
/// degrees of freedom.
///
/// Both the train and the bridge are carried in this shape; the coupling
/// between them lives outside, in the constraint rows.
#[derive(Debug, Clone)]
pub struct SecondOrderSystem {
    pub m: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// Constant external load vector.
    pub p: DVector<f64>,
    pub n_dof: usize,
}

impl SecondOrderSystem {
    /// Builds a system, checking shapes and the symmetry of `M` and `K`.
    pub fn new(
        m: DMatrix<f64>,
        c: DMatrix<f64>,
        k: DMatrix<f64>,
        p: DVector<f64>,
    ) -> Result<Self> {
        let n = m.nrows();
        for (name, mat) in [("M", &m), ("C", &c), ("K", &k)] {
            if mat.nrows() != n || mat.ncols() != n {
                return Err(VtsiError::InvalidModel(format!(
                    "{name} must be {n}x{n}, got {}x{}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
        }
        if p.len() != n {
            return Err(VtsiError::InvalidModel(format!(
                "load vector length {} does not match {n} DOFs",
                p.len()
            )));
        }
        for (name, mat) in [("M", &m), ("K", &k)] {
            let asym = relative_asymmetry(mat);
            if asym > SYMMETRY_TOL {
                return Err(VtsiError::InvalidModel(format!(
                    "{name} asymmetry {asym:.3e} exceeds {SYMMETRY_TOL:.0e}"
                )));
            }
        }
        Ok(Self { m, c, k, p, n_dof: n })
    }

    /// A system with no degrees of freedom; useful as a placeholder.
    pub fn empty() -> Self {
        Self {
            m: DMatrix::zeros(0, 0),
            c: DMatrix::zeros(0, 0),
            k: DMatrix::zeros(0, 0),
            p: DVector::zeros(0),
            n_dof: 0,
        }
    }

    /// Same matrices with the load vector replaced.
    pub fn with_load(&self, p: DVector<f64>) -> Self {
        assert_eq!(p.len(), self.n_dof);
        Self { p, ..self.clone() }
    }
}
