//! Small dense linear-algebra helpers shared by the assembly and
//! time-stepping code: the generalized symmetric eigenproblem and the
//! bordered (KKT) solve used for constrained statics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VtsiError};

/// Solves the generalized symmetric eigenproblem `K φ = ω² M φ` for SPD `M`
/// and returns the eigenvalues `ω²` in ascending order.
///
/// The problem is reduced to a standard symmetric one through the Cholesky
/// factor of `M`: with `M = L Lᵀ`, the matrix `L⁻¹ K L⁻ᵀ` has the same
/// eigenvalues.
pub fn generalized_symmetric_eigenvalues(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = k.nrows();
    assert_eq!(k.shape(), m.shape(), "K and M must have identical shapes");
    let chol = nalgebra::linalg::Cholesky::new(m.clone())
        .ok_or_else(|| VtsiError::InvalidModel("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // B = L⁻¹ K L⁻ᵀ, computed with two triangular solves.
    let x = l
        .solve_lower_triangular(k)
        .ok_or_else(|| VtsiError::InvalidModel("singular Cholesky factor".into()))?;
    let bt = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| VtsiError::InvalidModel("singular Cholesky factor".into()))?;
    // Symmetrize to kill the O(eps) skew part before the symmetric solver.
    let b = (&bt + bt.transpose()) * 0.5;
    let eig = nalgebra::linalg::SymmetricEigen::try_new(b, f64::EPSILON, 10_000 * n.max(1))
        .ok_or(VtsiError::EigenDidNotConverge)?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(vals)
}

/// Solves the saddle-point system
///
/// ```text
/// [ K   Gᵀ ] [ u ]   [ f ]
/// [ G   0  ] [ λ ] = [ g ]
/// ```
///
/// with a dense LU factorization of the bordered matrix. `K` may be singular
/// as long as the constraint rows `G` remove its null space.
pub fn solve_kkt(
    k: &DMatrix<f64>,
    g: &DMatrix<f64>,
    f: &DVector<f64>,
    gv: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = k.nrows();
    let m = g.nrows();
    assert_eq!(g.ncols(), n);
    let mut a = DMatrix::<f64>::zeros(n + m, n + m);
    a.view_mut((0, 0), (n, n)).copy_from(k);
    a.view_mut((n, 0), (m, n)).copy_from(g);
    a.view_mut((0, n), (n, m)).copy_from(&g.transpose());
    let mut rhs = DVector::<f64>::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(f);
    rhs.rows_mut(n, m).copy_from(gv);
    let lu = a.lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| VtsiError::SingularStatics("bordered KKT matrix is singular".into()))?;
    Ok((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
}

/// Relative Frobenius asymmetry `‖A − Aᵀ‖ / ‖A‖` (0 for the zero matrix).
pub fn relative_asymmetry(a: &DMatrix<f64>) -> f64 {
    let norm = a.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (a - a.transpose()).norm() / norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn generalized_eigen_matches_hand_solution() {
        // K = diag(4, 9), M = I → ω² = {4, 9}.
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 4.0]));
        let m = DMatrix::identity(2, 2);
        let vals = generalized_symmetric_eigenvalues(&k, &m).unwrap();
        assert_relative_eq!(vals[0], 4.0, max_relative = 1e-12);
        assert_relative_eq!(vals[1], 9.0, max_relative = 1e-12);
    }

    #[test]
    fn kkt_solves_constrained_spring() {
        // Two unit springs in series, right end pinned: K u = f with u₂ = 0.
        let k = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0]);
        let g = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let f = DVector::from_vec(vec![1.0, 0.0]);
        let (u, lam) = solve_kkt(&k, &g, &f, &DVector::zeros(1)).unwrap();
        // Both springs resist the load: u₁ = f/(k₁+k₂); the pin carries
        // the force transmitted through the second spring.
        assert_relative_eq!(u[0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(u[1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(lam[0], 0.5, max_relative = 1e-12);
    }
}
