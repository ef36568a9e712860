//! Cubic B-spline interpolation of the wheel-deflection constraint.
//!
//! Instead of the per-element Hermite rows, the bridge deflection under a
//! wheel is read through a cubic (order k = 4) B-spline curve whose control
//! polygon vertices are the bridge nodes. Cubic B-splines are C² in the
//! parameter, so the resulting influence rows have a continuous second
//! derivative along the wheel path, which removes the curvature jumps at
//! element joints at the cost of no longer interpolating the nodal values.
//!
//! The knot vector is open uniform over the chord-length parameterization
//! of the node coordinates. The construction relies on clamped control
//! points beyond the bridge ends (fixed approach segments), so it is only
//! available for fixed-end configurations.

use nalgebra::DVector;

use crate::bridge::{BcKind, BridgeModel};
use crate::error::{Result, VtsiError};

/// B-spline order used for the constraint interpolation (cubic).
pub const SPLINE_ORDER: usize = 4;

/// Normalized B-spline basis function `N_{i,k}(t)` by the Cox-de Boor
/// recursion over `knots`. Zero-width spans contribute zero. The parameter
/// domain is closed on the right: `t = knots[last]` evaluates the limit
/// from below.
pub fn bspline_basis(knots: &[f64], i: usize, k: usize, t: f64) -> f64 {
    debug_assert!(k >= 1 && i + k < knots.len() + 1);
    if k == 1 {
        let closes_domain = t == *knots.last().unwrap() && knots[i + 1] == *knots.last().unwrap();
        return if (knots[i] <= t && t < knots[i + 1]) || (closes_domain && knots[i] < knots[i + 1])
        {
            1.0
        } else {
            0.0
        };
    }
    let mut value = 0.0;
    let left_den = knots[i + k - 1] - knots[i];
    if left_den > 0.0 {
        value += (t - knots[i]) / left_den * bspline_basis(knots, i, k - 1, t);
    }
    let right_den = knots[i + k] - knots[i + 1];
    if right_den > 0.0 {
        value += (knots[i + k] - t) / right_den * bspline_basis(knots, i + 1, k - 1, t);
    }
    value
}

/// Open uniform knot vector of order `k` for `n_ctrl` control points over
/// `[t0, t1]`: end knots repeated `k` times, interior knots evenly spaced.
pub fn open_uniform_knots(n_ctrl: usize, k: usize, t0: f64, t1: f64) -> Result<Vec<f64>> {
    if n_ctrl < k {
        return Err(VtsiError::InvalidModel(format!(
            "need at least {k} control points for an order-{k} spline, got {n_ctrl}"
        )));
    }
    let n_interior = n_ctrl - k;
    let n_segments = (n_interior + 1) as f64;
    let mut knots = Vec::with_capacity(n_ctrl + k);
    knots.extend(std::iter::repeat(t0).take(k));
    for i in 1..=n_interior {
        knots.push(t0 + (t1 - t0) * i as f64 / n_segments);
    }
    knots.extend(std::iter::repeat(t1).take(k));
    Ok(knots)
}

/// Spline-based influence-row builder for a bridge model.
#[derive(Debug, Clone)]
pub struct SplineInfluence {
    knots: Vec<f64>,
    /// Free deflection DOF per control point (bridge node); `None` where
    /// the node deflection is constrained.
    ctrl_dofs: Vec<Option<usize>>,
    n_free: usize,
}

impl SplineInfluence {
    /// Builds the spline space over the bridge nodes (approach segments
    /// included, supplying the clamped end control points).
    ///
    /// Simply supported configurations are rejected: the spline end slope
    /// is pinned to the control polygon, which contradicts the free end
    /// rotations of such models.
    pub fn new(bridge: &BridgeModel) -> Result<Self> {
        if bridge.bc_kind == BcKind::SimplySupported {
            return Err(VtsiError::Unsupported(
                "spline constraint interpolation requires fixed ends".into(),
            ));
        }
        let n = bridge.node_x.len();
        if n < SPLINE_ORDER {
            return Err(VtsiError::InvalidModel(format!(
                "need at least {SPLINE_ORDER} bridge nodes for the spline constraint"
            )));
        }
        // Chord-length parameterization: the nodes are collinear, so the
        // accumulated chord is x − x_first and the wheel position maps to
        // the parameter directly. Interior knots by averaging (open knot
        // vector) keep the basis aligned with its control polygon.
        let params = &bridge.node_x;
        let mut knots = Vec::with_capacity(n + SPLINE_ORDER);
        knots.extend(std::iter::repeat(params[0]).take(SPLINE_ORDER));
        for i in 0..n - SPLINE_ORDER {
            let avg = (params[i + 1] + params[i + 2] + params[i + 3]) / 3.0;
            knots.push(avg);
        }
        knots.extend(std::iter::repeat(params[n - 1]).take(SPLINE_ORDER));
        let ctrl_dofs = (0..n).map(|i| bridge.free_index(2 * i)).collect();
        Ok(Self {
            knots,
            ctrl_dofs,
            n_free: bridge.n_free(),
        })
    }

    /// Parameter domain covered by the spline.
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    /// Index of the knot span containing `t` (clamped to the last
    /// non-empty span at the right end).
    fn span_of(&self, t: f64) -> usize {
        let k = SPLINE_ORDER;
        let last = self.knots.len() - k - 1; // last control index
        let mut lo = k - 1;
        let mut hi = last;
        while self.knots[hi] == self.knots[hi + 1] {
            hi -= 1;
        }
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.knots[mid] <= t {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// Nonzero basis values at `t`: control index of the first weight and
    /// the `SPLINE_ORDER` weights `N_{i,4}(t)`.
    pub fn basis_row(&self, t: f64) -> (usize, [f64; SPLINE_ORDER]) {
        let span = self.span_of(t);
        let first = span + 1 - SPLINE_ORDER;
        let mut w = [0.0; SPLINE_ORDER];
        for (j, slot) in w.iter_mut().enumerate() {
            *slot = bspline_basis(&self.knots, first + j, SPLINE_ORDER, t);
        }
        (first, w)
    }

    /// Influence row over the free bridge DOFs for a wheel at `x`: spline
    /// basis weights on the deflection DOFs of the supporting control
    /// nodes, zero on rotation DOFs. Weights landing on constrained nodes
    /// are dropped.
    pub fn influence_row(&self, x: f64) -> DVector<f64> {
        let mut row = DVector::zeros(self.n_free);
        let (d0, d1) = self.domain();
        if x < d0 || x > d1 {
            return row;
        }
        let (first, weights) = self.basis_row(x);
        for (j, &w) in weights.iter().enumerate() {
            if let Some(free) = self.ctrl_dofs[first + j] {
                row[free] += w;
            }
        }
        row
    }
}
