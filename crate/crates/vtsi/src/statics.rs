//! Static pre-analysis: dead loads are applied once, before the dynamic
//! run, and the transient schemes integrate increments about the static
//! solution.
//!
//! The multiplier of the increment problem is kept as the **total**
//! contact force by moving the traveling static wheel loads into a
//! constant effective train load `L^tᵀ λ_s`: with wheels pinned the
//! increment statics then reproduce `λ = λ_s` exactly, and on the span
//! the unilateral conditions `λ ≥ 0` act on the physical force.

use nalgebra::{DMatrix, DVector};

use crate::bridge::BridgeModel;
use crate::coupling::ConstraintPath;
use crate::error::{Result, VtsiError};
use crate::linalg::solve_kkt;
use crate::train::TrainModel;

/// Output of the static pre-analysis at the run start time.
#[derive(Debug, Clone)]
pub struct StaticState {
    /// Traveling static wheel loads λ_s (wheels pinned to rigid ground).
    pub wheel_loads: DVector<f64>,
    /// Constant effective train load `L^tᵀ λ_s` driving the increments.
    pub train_load: DVector<f64>,
    /// Total static contact forces in the start configuration.
    pub lambda: DVector<f64>,
    /// Initial displacement increments (zero for an off-span start).
    pub train_u0: DVector<f64>,
    pub bridge_u0: DVector<f64>,
    /// Absolute static displacements: suspension compressions plus the
    /// start-configuration increment for the train; dead-load sag plus the
    /// increment for the bridge.
    pub train_u_abs: DVector<f64>,
    pub bridge_u_abs: DVector<f64>,
}

/// Solves the constrained statics of the coupled system at time `t0`:
/// dead loads on both subsystems, wheels pinned to the track (rigid ground
/// off the span, deck plus irregularity on it).
pub fn static_init(
    train: &TrainModel,
    bridge: &BridgeModel,
    path: &dyn ConstraintPath,
    t0: f64,
) -> Result<StaticState> {
    if path.n_wheels() != train.n_wheels() {
        return Err(VtsiError::InvalidModel(format!(
            "constraint path has {} wheels, train has {}",
            path.n_wheels(),
            train.n_wheels()
        )));
    }
    let (wheel_loads, train_u_static) = train.static_wheel_loads()?;
    let train_load = train.scatter_wheel_forces(&wheel_loads);

    // Bridge dead-load sag (increment datum).
    let bridge_dead = bridge
        .system
        .k
        .clone()
        .lu()
        .solve(&bridge.system.p)
        .ok_or_else(|| VtsiError::SingularStatics("bridge stiffness is singular".into()))?;

    // Increment statics at the start configuration.
    let s0 = path.state_at(t0);
    let n_t = train.n_dof();
    let n_b = bridge.n_free();
    let n_w = train.n_wheels();
    let mut k = DMatrix::zeros(n_t + n_b, n_t + n_b);
    k.view_mut((0, 0), (n_t, n_t)).copy_from(&train.system.k);
    k.view_mut((n_t, n_t), (n_b, n_b)).copy_from(&bridge.system.k);
    let mut g = DMatrix::zeros(n_w, n_t + n_b);
    for (i, &d) in train.wheel_dofs.iter().enumerate() {
        g[(i, d)] = 1.0;
    }
    g.view_mut((0, n_t), (n_w, n_b)).copy_from(&s0.lb);
    let mut f = DVector::zeros(n_t + n_b);
    f.rows_mut(0, n_t).copy_from(&train_load);
    let (w, lambda) = solve_kkt(&k, &g, &f, &(-s0.rho.clone()))?;
    let train_u0 = w.rows(0, n_t).into_owned();
    let bridge_u0 = w.rows(n_t, n_b).into_owned();

    Ok(StaticState {
        wheel_loads,
        train_load,
        lambda,
        train_u_abs: &train_u_static + &train_u0,
        bridge_u_abs: &bridge_dead + &bridge_u0,
        train_u0,
        bridge_u0,
    })
}
