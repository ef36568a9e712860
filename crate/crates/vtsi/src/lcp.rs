//! Dense linear complementarity solver.
//!
//! Solves, for a square matrix `A` and vector `q`,
//!
//! ```text
//! z ≥ 0,    w = A·z − q ≥ 0,    zᵀw = 0
//! ```
//!
//! by complementary (Lemke) pivoting with a unit covering vector and
//! lexicographic tie-breaking for degenerate ratio tests. The contact
//! coupling matrices fed to it are positive-definite-like Schur
//! complements of size `n_wheels`, for which the pivoting terminates with
//! a solution; structurally deficient problems surface as ray termination.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VtsiError};

/// A complementarity solution: the primal `z` and slack `w = A·z − q`.
#[derive(Debug, Clone)]
pub struct LcpSolution {
    pub z: DVector<f64>,
    pub w: DVector<f64>,
}

impl LcpSolution {
    /// Largest violation of the three complementarity conditions, each
    /// measured in the natural units of `z`/`w`: `(min z, min w, |zᵀw|)`.
    pub fn violations(&self) -> (f64, f64, f64) {
        let min_z = self.z.iter().copied().fold(f64::INFINITY, f64::min);
        let min_w = self.w.iter().copied().fold(f64::INFINITY, f64::min);
        (min_z.min(0.0), min_w.min(0.0), self.z.dot(&self.w).abs())
    }
}

/// Solves the LCP `w = A·z − q ≥ 0, z ≥ 0, zᵀw = 0`.
///
/// `step` only labels the error on ray termination.
pub fn lcp_solve(a: &DMatrix<f64>, q: &DVector<f64>, step: usize) -> Result<LcpSolution> {
    let n = q.len();
    assert_eq!(a.nrows(), n);
    assert_eq!(a.ncols(), n);
    if n == 0 {
        return Ok(LcpSolution {
            z: DVector::zeros(0),
            w: DVector::zeros(0),
        });
    }
    // Trivial case: q ≤ 0 means w = −q ≥ 0 with z = 0.
    if q.iter().all(|&v| v <= 0.0) {
        return Ok(LcpSolution {
            z: DVector::zeros(n),
            w: -q,
        });
    }

    // Equation form: I·w − A·z − e·z₀ = −q, with column ids
    // w_i = i, z_j = n + j, z₀ = 2n, rhs in column 2n + 1.
    let ncols = 2 * n + 2;
    let rhs_col = 2 * n + 1;
    let z0_col = 2 * n;
    let mut t = DMatrix::<f64>::zeros(n, ncols);
    for i in 0..n {
        t[(i, i)] = 1.0;
        t[(i, z0_col)] = -1.0;
        t[(i, rhs_col)] = -q[i];
        for j in 0..n {
            t[(i, n + j)] = -a[(i, j)];
        }
    }
    let mut basis: Vec<usize> = (0..n).collect();

    // First pivot: z₀ enters in the row of the most negative rhs.
    let mut row = (0..n)
        .min_by(|&i, &j| t[(i, rhs_col)].partial_cmp(&t[(j, rhs_col)]).unwrap())
        .unwrap();
    let mut leaving = basis[row];
    pivot(&mut t, &mut basis, row, z0_col);

    let max_iter = 200 * n + 1000;
    for _ in 0..max_iter {
        // The complement of whatever just left enters next.
        let entering = if leaving < n { n + leaving } else { leaving - n };
        // Lexicographic minimum ratio test over rows with positive pivot
        // coefficient; the w-columns hold the inverse-basis rows used for
        // the tie-break.
        let mut best: Option<usize> = None;
        for i in 0..n {
            let piv = t[(i, entering)];
            if piv <= 1e-12 {
                continue;
            }
            best = Some(match best {
                None => i,
                Some(b) => {
                    if lex_less(&t, i, b, entering, rhs_col, n) {
                        i
                    } else {
                        b
                    }
                }
            });
        }
        let Some(r) = best else {
            return Err(VtsiError::RayTermination { step });
        };
        row = r;
        leaving = basis[row];
        pivot(&mut t, &mut basis, row, entering);
        if leaving == z0_col {
            break;
        }
    }
    if basis.contains(&z0_col) {
        return Err(VtsiError::RayTermination { step });
    }

    let mut z = DVector::zeros(n);
    let mut w = DVector::zeros(n);
    for (i, &b) in basis.iter().enumerate() {
        let v = t[(i, rhs_col)];
        if b < n {
            w[b] = v;
        } else if b < 2 * n {
            z[b - n] = v;
        }
    }
    Ok(LcpSolution { z, w })
}

/// Gauss-Jordan pivot on `(row, col)`.
fn pivot(t: &mut DMatrix<f64>, basis: &mut [usize], row: usize, col: usize) {
    let piv = t[(row, col)];
    debug_assert!(piv.abs() > 0.0, "zero pivot");
    let ncols = t.ncols();
    for j in 0..ncols {
        t[(row, j)] /= piv;
    }
    for i in 0..t.nrows() {
        if i == row {
            continue;
        }
        let factor = t[(i, col)];
        if factor == 0.0 {
            continue;
        }
        for j in 0..ncols {
            t[(i, j)] -= factor * t[(row, j)];
        }
    }
    basis[row] = col;
}

/// Compares rows `i` and `b` by the lexicographic ratio
/// `(rhs, B⁻¹ row) / pivot`, returning true when `i` is strictly smaller.
fn lex_less(
    t: &DMatrix<f64>,
    i: usize,
    b: usize,
    entering: usize,
    rhs_col: usize,
    n: usize,
) -> bool {
    let pi = t[(i, entering)];
    let pb = t[(b, entering)];
    let cols = std::iter::once(rhs_col).chain(0..n);
    for c in cols {
        let ri = t[(i, c)] / pi;
        let rb = t[(b, c)] / pb;
        if (ri - rb).abs() > 1e-12 * ri.abs().max(rb.abs()).max(1.0) {
            return ri < rb;
        }
    }
    false
}

/// Brute-force reference: enumerates all active sets and returns the
/// complementary solution. Exponential in `n`; test use only.
pub fn lcp_enumerate(a: &DMatrix<f64>, q: &DVector<f64>, tol: f64) -> Option<LcpSolution> {
    let n = q.len();
    for mask in 0..(1u32 << n) {
        let active: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let m = active.len();
        let mut z = DVector::zeros(n);
        if m > 0 {
            let sub = DMatrix::from_fn(m, m, |r, c| a[(active[r], active[c])]);
            let qs = DVector::from_iterator(m, active.iter().map(|&i| q[i]));
            let Some(zs) = sub.lu().solve(&qs) else {
                continue;
            };
            if zs.iter().any(|&v| v < -tol) {
                continue;
            }
            for (k, &i) in active.iter().enumerate() {
                z[i] = zs[k].max(0.0);
            }
        }
        let w = a * &z - q;
        if w.iter().all(|&v| v >= -tol) {
            return Some(LcpSolution { z, w });
        }
    }
    None
}
