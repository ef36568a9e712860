//! Wheel-bridge coupling: wheel kinematics along the deck, the
//! time-dependent influence matrix `L^b(t)` and the constraint residual
//! `L^t u^t + L^b(t) u^b + ρ(t)`.
//!
//! Off-span wheels keep their constraint row with a zero `L^b` part and
//! ρ = 0, which pins the wheel displacement to zero (rigid ground) while
//! keeping the multiplier vector a fixed size for the whole run.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bridge::{element_influence, element_influence_d1, element_influence_d2};
use crate::bridge::{BridgeModel, Location};
use crate::bspline::SplineInfluence;
use crate::error::Result;
use crate::irregularity::TrackIrregularity;
use crate::train::TrainModel;

/// Which influence-row construction couples wheels to the bridge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintInterp {
    /// Per-element Hermite rows (C¹ across joints).
    Hermite,
    /// Cubic B-spline rows over the bridge nodes (C², fixed ends only).
    BSpline,
}

/// Constraint data frozen at one time instant.
#[derive(Debug, Clone)]
pub struct CouplingState {
    pub t: f64,
    /// Wheel positions along the track (m).
    pub positions: Vec<f64>,
    /// Whether each wheel is on the load-carrying extent.
    pub active: Vec<bool>,
    /// Influence rows, `n_wheels × n_bridge_free`; zero rows off span.
    pub lb: DMatrix<f64>,
    /// Track irregularity under each wheel (m); zero off span.
    pub rho: DVector<f64>,
}

/// Source of constraint data for the integrators.
pub trait ConstraintPath: Send + Sync {
    fn n_wheels(&self) -> usize;
    fn state_at(&self, t: f64) -> CouplingState;
}

/// Rigid motion of the wheel set: `x_w(t) = x_w(0) + v·t`.
pub fn wheel_positions(x0: &[f64], speed: f64, t: f64) -> Vec<f64> {
    x0.iter().map(|&x| x + speed * t).collect()
}

/// Assembles the influence matrix for a set of wheel positions with the
/// Hermite construction: each active row is the host element's influence
/// row scattered to the free bridge DOFs.
pub fn assemble_influence(bridge: &BridgeModel, positions: &[f64]) -> (DMatrix<f64>, Vec<bool>) {
    let mut lb = DMatrix::zeros(positions.len(), bridge.n_free());
    let mut active = vec![false; positions.len()];
    for (i, &x) in positions.iter().enumerate() {
        if let Location::OnSpan { element, a } = bridge.locate(x) {
            let l = bridge.elements[element].length;
            let row = element_influence(a, l).expect("locate returned a within the element");
            let mut out = DVector::zeros(bridge.n_free());
            bridge.scatter_element_row(element, row, &mut out);
            lb.row_mut(i).copy_from(&out.transpose());
            active[i] = true;
        }
    }
    (lb, active)
}

/// Residual of the kinematic constraint, per wheel:
/// `r = L^t u^t + L^b u^b + ρ`. Off-span rows reduce to the pinned wheel
/// displacement.
pub fn constraint_residual(
    train: &TrainModel,
    u_train: &DVector<f64>,
    u_bridge: &DVector<f64>,
    state: &CouplingState,
) -> DVector<f64> {
    train.wheel_values(u_train) + &state.lb * u_bridge + &state.rho
}

/// Wheels traversing the bridge at constant speed, with optional track
/// irregularities and a selectable influence-row construction.
pub struct MovingWheels<'a> {
    bridge: &'a BridgeModel,
    /// Wheel offsets from the reference (rear-most) wheel, ascending.
    offsets: Vec<f64>,
    /// Position of the reference wheel at t = 0 (m).
    start: f64,
    /// Train speed (m/s), constant.
    speed: f64,
    irregularity: Option<Arc<dyn TrackIrregularity>>,
    spline: Option<SplineInfluence>,
    /// Track datum: with a dead-load deflection here, the rail follows the
    /// unloaded structure geometry and the wheels ride the dead-load sag
    /// (it enters ρ through the influence rows). Without it the rail is
    /// level on the dead-loaded deck.
    datum_sag: Option<DVector<f64>>,
}

impl<'a> MovingWheels<'a> {
    pub fn new(
        bridge: &'a BridgeModel,
        train: &TrainModel,
        start: f64,
        speed: f64,
        irregularity: Option<Arc<dyn TrackIrregularity>>,
        interp: ConstraintInterp,
    ) -> Result<Self> {
        let spline = match interp {
            ConstraintInterp::Hermite => None,
            ConstraintInterp::BSpline => Some(SplineInfluence::new(bridge)?),
        };
        Ok(Self {
            bridge,
            offsets: train.wheel_offsets.clone(),
            start,
            speed,
            irregularity,
            spline,
            datum_sag: None,
        })
    }

    /// Lays the rail on the unloaded structure: wheels ride the given
    /// static (dead-load) deflection of the free bridge DOFs.
    pub fn with_unloaded_datum(mut self, dead_load_deflection: DVector<f64>) -> Self {
        assert_eq!(dead_load_deflection.len(), self.bridge.n_free());
        self.datum_sag = Some(dead_load_deflection);
        self
    }

    /// Wheel positions at time `t`.
    pub fn positions(&self, t: f64) -> Vec<f64> {
        self.offsets
            .iter()
            .map(|&o| self.start + o + self.speed * t)
            .collect()
    }

    /// Time at which wheel `i` enters the load-carrying extent.
    pub fn entry_time(&self, wheel: usize) -> f64 {
        (self.bridge.span_extent.0 - self.start - self.offsets[wheel]) / self.speed
    }

    /// Time at which wheel `i` leaves the load-carrying extent.
    pub fn exit_time(&self, wheel: usize) -> f64 {
        (self.bridge.span_extent.1 - self.start - self.offsets[wheel]) / self.speed
    }

    fn rho_at(&self, x: f64, active: bool) -> f64 {
        match (&self.irregularity, active) {
            (Some(p), true) => p.eval(x),
            _ => 0.0,
        }
    }

    /// Constraint state plus the first and second time derivatives of the
    /// influence rows and irregularities, used by the direct-coupling
    /// formulation. Hermite rows only: the spline path has no piecewise
    /// element derivatives to chain.
    pub fn state_with_derivatives(&self, t: f64) -> PathDerivatives {
        assert!(
            self.spline.is_none(),
            "analytic row derivatives require the Hermite construction"
        );
        let positions = self.positions(t);
        let n = positions.len();
        let nb = self.bridge.n_free();
        let mut state = CouplingState {
            t,
            positions: positions.clone(),
            active: vec![false; n],
            lb: DMatrix::zeros(n, nb),
            rho: DVector::zeros(n),
        };
        let mut lb_d1 = DMatrix::zeros(n, nb);
        let mut lb_d2 = DMatrix::zeros(n, nb);
        let mut rho_d1 = DVector::zeros(n);
        let mut rho_d2 = DVector::zeros(n);
        let v = self.speed;
        for (i, &x) in positions.iter().enumerate() {
            if let Location::OnSpan { element, a } = self.bridge.locate(x) {
                let l = self.bridge.elements[element].length;
                let row = element_influence(a, l).expect("a within element");
                let d1 = element_influence_d1(a, l);
                let d2 = element_influence_d2(a, l);
                let scatter = |vals: [f64; 4], mat: &mut DMatrix<f64>, factor: f64| {
                    let mut out = DVector::zeros(nb);
                    self.bridge.scatter_element_row(element, vals, &mut out);
                    mat.row_mut(i).copy_from(&(out.transpose() * factor));
                };
                scatter(row, &mut state.lb, 1.0);
                scatter(d1, &mut lb_d1, v);
                scatter(d2, &mut lb_d2, v * v);
                state.active[i] = true;
                if let Some(p) = &self.irregularity {
                    state.rho[i] = p.eval(x);
                    rho_d1[i] = v * p.eval_d1(x);
                    rho_d2[i] = v * v * p.eval_d2(x);
                }
            }
        }
        if let Some(sag) = &self.datum_sag {
            state.rho += &state.lb * sag;
            rho_d1 += &lb_d1 * sag;
            rho_d2 += &lb_d2 * sag;
        }
        PathDerivatives {
            state,
            lb_d1,
            lb_d2,
            rho_d1,
            rho_d2,
        }
    }
}

/// Constraint state with analytic time derivatives of `L^b` and ρ.
pub struct PathDerivatives {
    pub state: CouplingState,
    pub lb_d1: DMatrix<f64>,
    pub lb_d2: DMatrix<f64>,
    pub rho_d1: DVector<f64>,
    pub rho_d2: DVector<f64>,
}

impl ConstraintPath for MovingWheels<'_> {
    fn n_wheels(&self) -> usize {
        self.offsets.len()
    }

    fn state_at(&self, t: f64) -> CouplingState {
        let positions = self.positions(t);
        let n = positions.len();
        let mut state = match &self.spline {
            None => {
                let (lb, active) = assemble_influence(self.bridge, &positions);
                let rho = DVector::from_iterator(
                    n,
                    positions
                        .iter()
                        .zip(&active)
                        .map(|(&x, &a)| self.rho_at(x, a)),
                );
                CouplingState {
                    t,
                    positions,
                    active,
                    lb,
                    rho,
                }
            }
            Some(spline) => {
                let mut lb = DMatrix::zeros(n, self.bridge.n_free());
                let mut active = vec![false; n];
                let mut rho = DVector::zeros(n);
                // The spline engages over its whole domain: across the
                // clamped approach segments the row ramps in from zero
                // with C² continuity instead of switching on at the span
                // edge (which would seed a persistent multiplier sawtooth
                // in the undamped mid-step scheme). The irregularity
                // profile is zero before the span start by its own gate.
                let (x0, x1) = spline.domain();
                for (i, &x) in positions.iter().enumerate() {
                    if x >= x0 && x <= x1 {
                        lb.row_mut(i)
                            .copy_from(&spline.influence_row(x).transpose());
                        active[i] = true;
                        rho[i] = self.rho_at(x, true);
                    }
                }
                CouplingState {
                    t,
                    positions,
                    active,
                    lb,
                    rho,
                }
            }
        };
        if let Some(sag) = &self.datum_sag {
            state.rho += &state.lb * sag;
        }
        state
    }
}

/// A constraint frozen in time: the wheels stay where they are. Used for
/// stationary-train runs and conservation checks.
pub struct FrozenPath {
    pub state: CouplingState,
}

impl FrozenPath {
    /// Freezes the state of `path` at time `t0`.
    pub fn capture(path: &dyn ConstraintPath, t0: f64) -> Self {
        Self {
            state: path.state_at(t0),
        }
    }
}

impl ConstraintPath for FrozenPath {
    fn n_wheels(&self) -> usize {
        self.state.positions.len()
    }

    fn state_at(&self, t: f64) -> CouplingState {
        let mut s = self.state.clone();
        s.t = t;
        s
    }
}
