//! Self-stabilized time integration for the constrained train-bridge
//! system (Bauchau's scheme): the equations of motion are enforced at the
//! step midpoint with trapezoidal kinematics, the kinematic constraint at
//! the step end, and the mid-step multiplier comes from a Schur-complement
//! system of size `n_wheels`.
//!
//! With the mid-step velocities `v̄ = (v_{n+1} + v_n)/2` the step solves
//!
//! ```text
//! M̄ᵗ v̄ᵗ + (Δt/2)·L^tᵀ λ            = aᵗ
//! M̄ᵇ v̄ᵇ + (Δt/2)·L^b(t_{n+1/2})ᵀ λ = aᵇ
//! (Δt/2)·(L^t v̄ᵗ + L^b(t_{n+1}) v̄ᵇ) = b
//! ```
//!
//! with `M̄ = M + (Δt/2)C + (Δt²/4)K`, `a = M v_n + (Δt/2)(P̄ − K u_n)`,
//! `b = −(L^t u^t_n + L^b(t_{n+1}) u^b_n)/2 − ρ(t_{n+1})/2`, then updates
//! `u_{n+1} = u_n + Δt v̄`, `v_{n+1} = 2v̄ − v_n`. The scheme reduces to the
//! trapezoidal (Newmark 1/4, 1/2) rule without constraints and preserves
//! the mechanical energy under a frozen constraint. Accelerations are the
//! mid-step byproduct `(v_{n+1} − v_n)/Δt`.
//!
//! Note the two evaluation times of `L^b`: the dynamics rows use the
//! midpoint, the constraint row the endpoint, making the Schur matrix
//! slightly nonsymmetric while the wheels move.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::coupling::constraint_residual;
use crate::error::{Result, VtsiError};
use crate::statics::{static_init, StaticState};
use crate::trace::{FullState, SimArgs, SimulationTrace, TraceRecorder};

pub struct BauchauIntegrator<'a> {
    args: &'a SimArgs<'a>,
    chol_t: Cholesky<f64, Dyn>,
    chol_b: Cholesky<f64, Dyn>,
    /// `M̄ᵗ⁻¹ L^tᵀ`, constant (the train influence rows do not move).
    yt: DMatrix<f64>,
    /// `L^t · yt`, the train block of the Schur matrix.
    wt: DMatrix<f64>,
    /// Effective constant train load (static wheel loads moved left).
    p_t: DVector<f64>,
    pub statics: StaticState,
    pub state: FullState,
    step: usize,
}

/// Per-step output: the mid-step multiplier and the scaled end-step
/// constraint residual.
pub struct StepOutput {
    pub lambda: DVector<f64>,
    pub active: Vec<bool>,
    pub scaled_residual: f64,
}

impl<'a> BauchauIntegrator<'a> {
    pub fn new(args: &'a SimArgs<'a>) -> Result<Self> {
        let dt = args.dt;
        let statics = static_init(args.train, args.bridge, args.path, 0.0)?;
        let half = dt / 2.0;
        let quarter = dt * dt / 4.0;
        let mbar = |s: &crate::system::SecondOrderSystem| {
            &s.m + &s.c * half + &s.k * quarter
        };
        let chol_t = Cholesky::new(mbar(&args.train.system)).ok_or_else(|| {
            VtsiError::InvalidModel("train effective matrix is not positive definite".into())
        })?;
        let chol_b = Cholesky::new(mbar(&args.bridge.system)).ok_or_else(|| {
            VtsiError::InvalidModel("bridge effective matrix is not positive definite".into())
        })?;
        let lt_t = args.train.lt_dense().transpose();
        let yt = chol_t.solve(&lt_t);
        let mut wt = DMatrix::zeros(args.train.n_wheels(), args.train.n_wheels());
        for (i, &d) in args.train.wheel_dofs.iter().enumerate() {
            wt.row_mut(i).copy_from(&yt.row(d));
        }
        let mut state = FullState::at_rest(0.0, args.train.n_dof(), args.bridge.n_free());
        state.u_t = statics.train_u0.clone();
        state.u_b = statics.bridge_u0.clone();
        let p_t = statics.train_load.clone();
        Ok(Self {
            args,
            chol_t,
            chol_b,
            yt,
            wt,
            p_t,
            statics,
            state,
            step: 0,
        })
    }

    /// Advances one step of size `dt`.
    pub fn step(&mut self) -> Result<StepOutput> {
        let dt = self.args.dt;
        let half = dt / 2.0;
        let t_n = self.state.t;
        let s_half = self.args.path.state_at(t_n + half);
        let s_full = self.args.path.state_at(t_n + dt);
        let train = self.args.train;
        let n_w = train.n_wheels();

        let a_t = &self.args.train.system.m * &self.state.v_t
            + (&self.p_t - &self.args.train.system.k * &self.state.u_t) * half;
        let a_b = &self.args.bridge.system.m * &self.state.v_b
            - (&self.args.bridge.system.k * &self.state.u_b) * half;
        let vhat_t = self.chol_t.solve(&a_t);
        let vhat_b = self.chol_b.solve(&a_b);

        let (lambda, vbar_t, vbar_b) = if n_w == 0 {
            (DVector::zeros(0), vhat_t, vhat_b)
        } else {
            let b = -(train.wheel_values(&self.state.u_t)
                + &s_full.lb * &self.state.u_b
                + &s_full.rho)
                * 0.5;
            let yb = self.chol_b.solve(&s_half.lb.transpose());
            let schur = (&self.wt + &s_full.lb * &yb) * (half * half);
            let rhs = (train.wheel_values(&vhat_t) + &s_full.lb * &vhat_b) * half - b;
            let lambda = schur.lu().solve(&rhs).ok_or(VtsiError::SingularCoupling {
                step: self.step,
                time: t_n,
                detail: "dependent constraint rows in the mid-step solve".into(),
            })?;
            let vbar_t = vhat_t - &self.yt * &lambda * half;
            let vbar_b = vhat_b - yb * &lambda * half;
            (lambda, vbar_t, vbar_b)
        };
        self.advance(&vbar_t, &vbar_b, dt);

        self.step += 1;
        self.state.t = t_n + dt;
        let r = constraint_residual(train, &self.state.u_t, &self.state.u_b, &s_full);
        let scaled_residual = if r.is_empty() {
            0.0
        } else {
            r.amax() / self.state.displacement_norm().max(1.0)
        };
        Ok(StepOutput {
            lambda,
            active: s_full.active,
            scaled_residual,
        })
    }

    fn advance(&mut self, vbar_t: &DVector<f64>, vbar_b: &DVector<f64>, dt: f64) {
        self.state.u_t += vbar_t * dt;
        self.state.u_b += vbar_b * dt;
        let v_t_new = vbar_t * 2.0 - &self.state.v_t;
        let v_b_new = vbar_b * 2.0 - &self.state.v_b;
        self.state.a_t = (&v_t_new - &self.state.v_t) / dt;
        self.state.a_b = (&v_b_new - &self.state.v_b) / dt;
        self.state.v_t = v_t_new;
        self.state.v_b = v_b_new;
    }
}

/// Runs the scheme over the whole horizon and records a trace. The
/// reported multiplier instants sit half a step before the state rows.
pub fn run(args: &SimArgs<'_>) -> Result<SimulationTrace> {
    let n_steps = args.n_steps()?;
    let mut integrator = BauchauIntegrator::new(args)?;
    let mut recorder = TraceRecorder::new(
        "bauchau",
        args.config_hash,
        args.dt,
        &args.probes,
        args.train,
        args.bridge,
        -args.dt / 2.0,
    )?;
    let s0 = args.path.state_at(0.0);
    recorder.record(
        &integrator.state,
        &integrator.statics.lambda,
        &s0.active,
        0.0,
    );
    for _ in 0..n_steps {
        let out = integrator.step()?;
        recorder.record(&integrator.state, &out.lambda, &out.active, out.scaled_residual);
    }
    Ok(recorder.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::{BcKind, BridgeModel};
    use crate::coupling::{ConstraintInterp, CouplingState, ConstraintPath, FrozenPath, MovingWheels};
    use crate::system::SecondOrderSystem;
    use crate::trace::Probe;
    use crate::train::{CarSpec, TrainModel};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn sdof_train(m: f64, c: f64, k: f64, p: f64) -> TrainModel {
        TrainModel {
            system: SecondOrderSystem::new(
                DMatrix::from_element(1, 1, m),
                DMatrix::from_element(1, 1, c),
                DMatrix::from_element(1, 1, k),
                DVector::from_element(1, p),
            )
            .unwrap(),
            wheel_dofs: vec![],
            wheel_offsets: vec![],
            partition: crate::train::DofPartition {
                carriage: vec![0],
                wheels: vec![],
            },
            total_length: 0.0,
        }
    }

    fn tiny_bridge() -> BridgeModel {
        BridgeModel::assemble(&[(30.0, 4)], 2.5e11, 36_000.0, BcKind::SimplySupported, None)
            .unwrap()
    }

    struct NoConstraint {
        n_bridge: usize,
    }
    impl ConstraintPath for NoConstraint {
        fn n_wheels(&self) -> usize {
            0
        }
        fn state_at(&self, t: f64) -> CouplingState {
            CouplingState {
                t,
                positions: vec![],
                active: vec![],
                lb: DMatrix::zeros(0, self.n_bridge),
                rho: DVector::zeros(0),
            }
        }
    }

    /// Closed-form trapezoidal-rule recurrence for an SDOF system,
    /// independent of the integrator code path.
    fn trapezoidal_sdof(
        m: f64,
        c: f64,
        k: f64,
        p: f64,
        u0: f64,
        v0: f64,
        dt: f64,
        steps: usize,
    ) -> (f64, f64) {
        let (mut u, mut v) = (u0, v0);
        let mbar = m + dt / 2.0 * c + dt * dt / 4.0 * k;
        for _ in 0..steps {
            let a = m * v + dt / 2.0 * (p - k * u);
            let vbar = a / mbar;
            u += dt * vbar;
            v = 2.0 * vbar - v;
        }
        (u, v)
    }

    #[test]
    fn unconstrained_limit_is_trapezoidal_rule() {
        // With no constraint rows the step must equal Newmark(1/4, 1/2)
        // exactly, step by step, to machine precision. The increments
        // integrate the unforced equation, so kick the system and follow.
        let (m, c, k, p) = (2.0, 0.3, 50.0, 1.7);
        let train = sdof_train(m, c, k, p);
        let bridge = tiny_bridge();
        let path = NoConstraint {
            n_bridge: bridge.n_free(),
        };
        let dt = 0.01;
        let args = SimArgs {
            train: &train,
            bridge: &bridge,
            path: &path,
            dt,
            t_end: 2.0,
            probes: vec![Probe::TrainDof { index: 0 }],
            config_hash: 0,
        };
        let mut integ = BauchauIntegrator::new(&args).unwrap();
        integ.state.v_t[0] = 0.25;
        let (mut u_ref, mut v_ref) = (0.0, 0.25);
        for _ in 0..200 {
            integ.step().unwrap();
            let (u2, v2) = trapezoidal_sdof(m, c, k, 0.0, u_ref, v_ref, dt, 1);
            u_ref = u2;
            v_ref = v2;
            assert_relative_eq!(integ.state.u_t[0], u_ref, epsilon = 1e-13, max_relative = 1e-12);
            assert_relative_eq!(integ.state.v_t[0], v_ref, epsilon = 1e-13, max_relative = 1e-12);
        }
    }

    #[test]
    fn quiescent_system_stays_at_rest() {
        // Train far from the bridge, nothing moves: every increment stays
        // exactly zero and λ equals the static wheel loads.
        let bridge = tiny_bridge();
        let train = TrainModel::build_car(&CarSpec {
            carriage_mass: 60_000.0,
            pitch_inertia: 1.125e6,
            wheel_mass: 1000.0,
            suspension_stiffness: 5e6,
            suspension_damping: 27e3,
            axle_spacing: 15.0,
            car_length: 20.0,
        })
        .unwrap();
        let path =
            MovingWheels::new(&bridge, &train, -500.0, 0.0, None, ConstraintInterp::Hermite)
                .unwrap();
        let args = SimArgs {
            train: &train,
            bridge: &bridge,
            path: &path,
            dt: 1e-3,
            t_end: 0.05,
            probes: vec![Probe::Wheel { index: 0 }],
            config_hash: 0,
        };
        let trace = run(&args).unwrap();
        let wheel = trace.probe("wheel:0").unwrap();
        let max_u = wheel.u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(max_u <= 1e-12, "wheel drifted {max_u:.3e} m");
        let lam = trace.lambda_series(0);
        for &l in &lam {
            assert_relative_eq!(l, lam[0], max_relative = 1e-9);
        }
        assert!(trace.max_scaled_residual <= 1e-12);
    }

    #[test]
    fn frozen_constraint_conserves_energy() {
        // Undamped car parked mid-span with the constraint frozen: the
        // scheme must not change the mechanical energy (measured about the
        // static equilibrium) over a long run.
        let bridge = tiny_bridge();
        let train = TrainModel::build_car(&CarSpec {
            carriage_mass: 60_000.0,
            pitch_inertia: 1.125e6,
            wheel_mass: 1000.0,
            suspension_stiffness: 5e6,
            suspension_damping: 0.0,
            axle_spacing: 15.0,
            car_length: 20.0,
        })
        .unwrap();
        let moving =
            MovingWheels::new(&bridge, &train, 5.0, 0.0, None, ConstraintInterp::Hermite).unwrap();
        let path = FrozenPath::capture(&moving, 0.0);
        let args = SimArgs {
            train: &train,
            bridge: &bridge,
            path: &path,
            dt: 1e-3,
            t_end: 1.0,
            probes: vec![],
            config_hash: 0,
        };
        let mut integ = BauchauIntegrator::new(&args).unwrap();
        // Kick the carriage; wheel velocities stay constrained.
        integ.state.v_t[0] = 0.1;
        integ.state.v_t[1] = 0.01;
        let p_eff = integ.statics.train_load.clone();
        let energy = |s: &FullState| {
            0.5 * (s.v_t.dot(&(&train.system.m * &s.v_t))
                + s.v_b.dot(&(&bridge.system.m * &s.v_b))
                + s.u_t.dot(&(&train.system.k * &s.u_t))
                + s.u_b.dot(&(&bridge.system.k * &s.u_b)))
                - p_eff.dot(&s.u_t)
        };
        // Let the first step reconcile velocities with the constraint,
        // then demand conservation.
        integ.step().unwrap();
        let e_ref = energy(&integ.state);
        let mut drift = 0.0_f64;
        for _ in 0..100_000 {
            integ.step().unwrap();
            let e = energy(&integ.state);
            drift = drift.max((e - e_ref).abs());
        }
        assert!(
            drift <= 1e-6 * e_ref.abs().max(1.0),
            "energy drift {drift:.3e} on reference {e_ref:.3e}"
        );
    }
}
