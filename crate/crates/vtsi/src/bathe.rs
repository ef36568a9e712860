//! Composite two-sub-step time integration (Bathe's method) for the
//! constrained train-bridge system, with optional unilateral contact.
//!
//! Each step of size Δt runs two implicit sub-steps:
//!
//! 1. trapezoidal rule to `t + Δt/2` with
//!    `M̄ = (16/Δt²)M + (4/Δt)C + K`,
//! 2. 3-point backward Euler to `t + Δt` with
//!    `M̄ = (9/Δt²)M + (3/Δt)C + K`.
//!
//! The kinematic constraint is enforced at **both** sub-step times. Each
//! sub-step solves the predictor `M̄ũ = a`, forms the wheel-sized coupling
//! matrix `A = L^t·(M̄ᵗ⁻¹L^tᵀ) + L^b·(M̄ᵇ⁻¹L^bᵀ)` and the constraint
//! excess `ρ̄ = L^tũᵗ + L^bũᵇ + ρ`, then either solves `Aλ = ρ̄`
//! (bilateral contact) or the complementarity problem
//! `Aλ − ρ̄ ≥ 0, λ ≥ 0, λᵀ(Aλ − ρ̄) = 0` (contact separation), and
//! corrects `u = ũ − M̄⁻¹Lᵀ·λ`.
//!
//! The backward-Euler sub-step damps the spurious high-frequency content
//! the mid-step scheme leaves in the contact forces.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::coupling::CouplingState;
use crate::error::{Result, VtsiError};
use crate::lcp::lcp_solve;
use crate::statics::{static_init, StaticState};
use crate::system::SecondOrderSystem;
use crate::trace::{ContactDiagnostics, FullState, SimArgs, SimulationTrace, TraceRecorder};
use crate::train::TrainModel;

/// How the wheel-bridge constraint is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactMode {
    /// Equality constraint: wheels never leave the track.
    Bilateral,
    /// Complementarity: wheels may separate and reattach; λ ≥ 0.
    Lcp,
}

/// Factorizations and influence solves for one sub-step family.
struct SubstepOps {
    chol_t: Cholesky<f64, Dyn>,
    chol_b: Cholesky<f64, Dyn>,
    /// `M̄ᵗ⁻¹ L^tᵀ`, constant within the run.
    yt: DMatrix<f64>,
    /// Train block `L^t·yt` of the coupling matrix.
    wt: DMatrix<f64>,
}

impl SubstepOps {
    fn new(
        train: &SecondOrderSystem,
        bridge: &SecondOrderSystem,
        wheel_dofs: &[usize],
        c_mass: f64,
        c_damp: f64,
    ) -> Result<Self> {
        let mbar =
            |s: &SecondOrderSystem| &s.m * c_mass + &s.c * c_damp + &s.k;
        let chol_t = Cholesky::new(mbar(train)).ok_or_else(|| {
            VtsiError::InvalidModel("train effective matrix is not positive definite".into())
        })?;
        let chol_b = Cholesky::new(mbar(bridge)).ok_or_else(|| {
            VtsiError::InvalidModel("bridge effective matrix is not positive definite".into())
        })?;
        let n_w = wheel_dofs.len();
        let mut lt_t = DMatrix::zeros(train.n_dof, n_w);
        for (i, &d) in wheel_dofs.iter().enumerate() {
            lt_t[(d, i)] = 1.0;
        }
        let yt = chol_t.solve(&lt_t);
        let mut wt = DMatrix::zeros(n_w, n_w);
        for (i, &d) in wheel_dofs.iter().enumerate() {
            wt.row_mut(i).copy_from(&yt.row(d));
        }
        Ok(Self {
            chol_t,
            chol_b,
            yt,
            wt,
        })
    }
}

/// Output of one full step (two sub-steps).
pub struct BatheStepOutput {
    pub lambda_half: DVector<f64>,
    pub lambda: DVector<f64>,
    pub active: Vec<bool>,
    /// Constraint measure, already scaled by max(1, ‖u‖∞): equality
    /// residual in bilateral mode, ‖min(λ, gap)‖∞ in LCP mode.
    pub scaled_residual: f64,
}

pub struct BatheIntegrator<'a> {
    args: &'a SimArgs<'a>,
    mode: ContactMode,
    half: SubstepOps,
    full: SubstepOps,
    p_t: DVector<f64>,
    pub statics: StaticState,
    pub state: FullState,
    pub contact_diag: ContactDiagnostics,
    step: usize,
}

impl<'a> BatheIntegrator<'a> {
    pub fn new(args: &'a SimArgs<'a>, mode: ContactMode) -> Result<Self> {
        let dt = args.dt;
        let statics = static_init(args.train, args.bridge, args.path, 0.0)?;
        let half = SubstepOps::new(
            &args.train.system,
            &args.bridge.system,
            &args.train.wheel_dofs,
            16.0 / (dt * dt),
            4.0 / dt,
        )?;
        let full = SubstepOps::new(
            &args.train.system,
            &args.bridge.system,
            &args.train.wheel_dofs,
            9.0 / (dt * dt),
            3.0 / dt,
        )?;
        let mut state = FullState::at_rest(0.0, args.train.n_dof(), args.bridge.n_free());
        state.u_t = statics.train_u0.clone();
        state.u_b = statics.bridge_u0.clone();
        // The run starts from static equilibrium: zero acceleration is the
        // consistent initial value (exact even for massless wheel DOFs).
        let p_t = statics.train_load.clone();
        Ok(Self {
            args,
            mode,
            half,
            full,
            p_t,
            statics,
            state,
            contact_diag: ContactDiagnostics::default(),
            step: 0,
        })
    }

    /// Solves one sub-step given the assembled right-hand sides and the
    /// constraint state at the sub-step time. Returns the corrected
    /// displacements and the multiplier.
    fn constrained_solve(
        &mut self,
        ops_kind: Substep,
        rhs_t: &DVector<f64>,
        rhs_b: &DVector<f64>,
        cs: &CouplingState,
        train: &TrainModel,
    ) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>, f64)> {
        let ops = match ops_kind {
            Substep::Half => &self.half,
            Substep::Full => &self.full,
        };
        let ut_pred = ops.chol_t.solve(rhs_t);
        let ub_pred = ops.chol_b.solve(rhs_b);
        let n_w = train.n_wheels();
        if n_w == 0 {
            return Ok((ut_pred, ub_pred, DVector::zeros(0), 0.0));
        }
        let yb = ops.chol_b.solve(&cs.lb.transpose());
        let a = &ops.wt + &cs.lb * &yb;
        let rho_bar = train.wheel_values(&ut_pred) + &cs.lb * &ub_pred + &cs.rho;
        let (lambda, slack) = match self.mode {
            ContactMode::Bilateral => {
                let lambda =
                    a.clone().lu().solve(&rho_bar).ok_or(VtsiError::SingularCoupling {
                        step: self.step,
                        time: cs.t,
                        detail: "dependent constraint rows in the sub-step solve".into(),
                    })?;
                (lambda, DVector::zeros(n_w))
            }
            ContactMode::Lcp => {
                let sol = lcp_solve(&a, &rho_bar, self.step)?;
                (sol.z, sol.w)
            }
        };
        let u_t = ut_pred - &ops.yt * &lambda;
        let u_b = ub_pred - yb * &lambda;
        let scale = u_t
            .iter()
            .chain(u_b.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(1.0);
        let residual = match self.mode {
            ContactMode::Bilateral => {
                let r = train.wheel_values(&u_t) + &cs.lb * &u_b + &cs.rho;
                r.amax()
            }
            ContactMode::Lcp => {
                // Complementarity measure: both λ and the gap are
                // non-negative and one of each pair vanishes.
                let mut worst = 0.0_f64;
                for i in 0..n_w {
                    worst = worst.max(lambda[i].min(slack[i]).abs());
                    worst = worst.max((-lambda[i]).max(0.0));
                    worst = worst.max((-slack[i]).max(0.0));
                }
                let comp = lambda.dot(&slack).abs();
                let min_l = lambda.iter().copied().fold(f64::INFINITY, f64::min);
                let min_g = slack.iter().copied().fold(f64::INFINITY, f64::min);
                self.contact_diag.fold(min_l.min(0.0), min_g.min(0.0), comp);
                worst
            }
        };
        Ok((u_t, u_b, lambda, residual / scale))
    }

    /// Advances one full step (trapezoidal then backward-Euler sub-step).
    pub fn step(&mut self) -> Result<BatheStepOutput> {
        let args = self.args;
        let dt = args.dt;
        let t_n = self.state.t;
        let train = args.train;
        let (ts, bs) = (&args.train.system, &args.bridge.system);

        // First sub-step: trapezoidal rule over Δt/2.
        let cs_half = args.path.state_at(t_n + dt / 2.0);
        let rhs_t = &self.p_t
            + &ts.c * (&self.state.u_t * (4.0 / dt) + &self.state.v_t)
            + &ts.m
                * (&self.state.u_t * (16.0 / (dt * dt))
                    + &self.state.v_t * (8.0 / dt)
                    + &self.state.a_t);
        let rhs_b = &bs.c * (&self.state.u_b * (4.0 / dt) + &self.state.v_b)
            + &bs.m
                * (&self.state.u_b * (16.0 / (dt * dt))
                    + &self.state.v_b * (8.0 / dt)
                    + &self.state.a_b);
        let (ut_half, ub_half, lambda_half, res_half) =
            self.constrained_solve(Substep::Half, &rhs_t, &rhs_b, &cs_half, train)?;
        let vt_half = (&ut_half - &self.state.u_t) * (4.0 / dt) - &self.state.v_t;
        let vb_half = (&ub_half - &self.state.u_b) * (4.0 / dt) - &self.state.v_b;

        // Second sub-step: 3-point backward Euler over the whole step.
        let cs_full = args.path.state_at(t_n + dt);
        let rhs_t = &self.p_t
            + &ts.c * (&ut_half * (4.0 / dt) - &self.state.u_t * (1.0 / dt))
            + &ts.m
                * (&ut_half * (12.0 / (dt * dt)) - &self.state.u_t * (3.0 / (dt * dt))
                    + &vt_half * (4.0 / dt)
                    - &self.state.v_t * (1.0 / dt));
        let rhs_b = &bs.c * (&ub_half * (4.0 / dt) - &self.state.u_b * (1.0 / dt))
            + &bs.m
                * (&ub_half * (12.0 / (dt * dt)) - &self.state.u_b * (3.0 / (dt * dt))
                    + &vb_half * (4.0 / dt)
                    - &self.state.v_b * (1.0 / dt));
        let (ut_full, ub_full, lambda, res_full) =
            self.constrained_solve(Substep::Full, &rhs_t, &rhs_b, &cs_full, train)?;
        let vt_full =
            (&self.state.u_t - &ut_half * 4.0 + &ut_full * 3.0) * (1.0 / dt);
        let vb_full =
            (&self.state.u_b - &ub_half * 4.0 + &ub_full * 3.0) * (1.0 / dt);
        let at_full = (&self.state.v_t - &vt_half * 4.0 + &vt_full * 3.0) * (1.0 / dt);
        let ab_full = (&self.state.v_b - &vb_half * 4.0 + &vb_full * 3.0) * (1.0 / dt);

        self.state = FullState {
            t: t_n + dt,
            u_t: ut_full,
            v_t: vt_full,
            a_t: at_full,
            u_b: ub_full,
            v_b: vb_full,
            a_b: ab_full,
        };
        self.step += 1;
        Ok(BatheStepOutput {
            lambda_half,
            lambda,
            active: cs_full.active,
            scaled_residual: res_half.max(res_full),
        })
    }
}

#[derive(Clone, Copy)]
enum Substep {
    Half,
    Full,
}

/// Runs the composite scheme over the horizon. Multipliers are recorded at
/// the full-step times, with the mid-step series kept alongside.
pub fn run(args: &SimArgs<'_>, mode: ContactMode) -> Result<SimulationTrace> {
    let n_steps = args.n_steps()?;
    let scheme = match mode {
        ContactMode::Bilateral => "bathe",
        ContactMode::Lcp => "bathe-lcp",
    };
    let mut integrator = BatheIntegrator::new(args, mode)?;
    let mut recorder = TraceRecorder::new(
        scheme,
        args.config_hash,
        args.dt,
        &args.probes,
        args.train,
        args.bridge,
        0.0,
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
        recorder.push_lambda_half(out.lambda_half);
        recorder.record(&integrator.state, &out.lambda, &out.active, out.scaled_residual);
    }
    if mode == ContactMode::Lcp {
        recorder.set_contact_diagnostics(integrator.contact_diag);
    }
    Ok(recorder.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::{BcKind, BridgeModel};
    use crate::coupling::ConstraintPath;
    use crate::trace::Probe;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn sdof_train(m: f64, c: f64, k: f64) -> TrainModel {
        TrainModel {
            system: SecondOrderSystem::new(
                DMatrix::from_element(1, 1, m),
                DMatrix::from_element(1, 1, c),
                DMatrix::from_element(1, 1, k),
                DVector::zeros(1),
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

    /// Pins every wheel to a prescribed motion: a rigid track whose
    /// elevation is −ρ(t).
    struct RigidTrack {
        n_bridge: usize,
        rho: fn(f64) -> f64,
    }
    impl ConstraintPath for RigidTrack {
        fn n_wheels(&self) -> usize {
            1
        }
        fn state_at(&self, t: f64) -> CouplingState {
            CouplingState {
                t,
                positions: vec![0.0],
                active: vec![false],
                lb: DMatrix::zeros(1, self.n_bridge),
                rho: DVector::from_element(1, (self.rho)(t)),
            }
        }
    }

    fn sdof_args<'a>(
        train: &'a TrainModel,
        bridge: &'a BridgeModel,
        path: &'a dyn ConstraintPath,
        dt: f64,
    ) -> SimArgs<'a> {
        SimArgs {
            train,
            bridge,
            path,
            dt,
            t_end: 100.0 * dt,
            probes: vec![Probe::TrainDof { index: 0 }],
            config_hash: 0,
        }
    }

    #[test]
    fn half_substep_matches_damped_sdof_to_third_order() {
        // One trapezoidal sub-step against the exact matrix exponential:
        // local error O(h³) with h = Δt/2, so quartering Δt divides the
        // one-step error by ~64.
        let (m, c, k) = (2.0_f64, 0.4_f64, 80.0_f64);
        let bridge = tiny_bridge();
        let path = NoConstraint {
            n_bridge: bridge.n_free(),
        };
        let exact = |u0: f64, v0: f64, h: f64| {
            // 2x2 exponential via the damped oscillator closed form.
            let wn = (k / m).sqrt();
            let zeta = c / (2.0 * (k * m).sqrt());
            let wd = wn * (1.0 - zeta * zeta).sqrt();
            let e = (-zeta * wn * h).exp();
            let (s, co) = (wd * h).sin_cos();
            let u = e * (u0 * co + (v0 + zeta * wn * u0) / wd * s);
            let v = e * (v0 * co - (u0 * wn * wn + zeta * wn * v0) / wd * s);
            (u, v)
        };
        let one_substep_error = |dt: f64| {
            let train = sdof_train(m, c, k);
            let args = sdof_args(&train, &bridge, &path, dt);
            let mut integ = BatheIntegrator::new(&args, ContactMode::Bilateral).unwrap();
            integ.state.u_t[0] = 0.02;
            integ.state.v_t[0] = -0.3;
            integ.state.a_t[0] = (-c * -0.3 - k * 0.02) / m;
            // Run the half sub-step only, by reading the mid state after a
            // full step is impossible; instead step a full Δt with the
            // composite scheme and compare at Δt against the exact flow:
            // the composite step is O(Δt³) locally as well.
            integ.step().unwrap();
            let (ue, _) = exact(0.02, -0.3, dt);
            (integ.state.u_t[0] - ue).abs()
        };
        let e1 = one_substep_error(0.02);
        let e2 = one_substep_error(0.005);
        let ratio = e1 / e2;
        assert!(
            ratio > 30.0,
            "expected ~64x local error reduction, got {ratio:.1} ({e1:.3e} vs {e2:.3e})"
        );
    }

    #[test]
    fn rigid_track_pins_wheel_to_rho() {
        // Degenerate rigid-bridge case: the wheel displacement must track
        // −ρ(t) exactly at every sub-step.
        let m = 1000.0;
        let train = TrainModel {
            system: SecondOrderSystem::new(
                DMatrix::from_element(1, 1, m),
                DMatrix::zeros(1, 1),
                DMatrix::from_element(1, 1, 1.0), // nominal spring to ground
                DVector::zeros(1),
            )
            .unwrap(),
            wheel_dofs: vec![0],
            wheel_offsets: vec![0.0],
            partition: crate::train::DofPartition {
                carriage: vec![],
                wheels: vec![0],
            },
            total_length: 0.0,
        };
        let bridge = tiny_bridge();
        let path = RigidTrack {
            n_bridge: bridge.n_free(),
            rho: |t| 1e-3 * (8.0 * t).sin(),
        };
        let args = SimArgs {
            train: &train,
            bridge: &bridge,
            path: &path,
            dt: 1e-3,
            t_end: 0.2,
            probes: vec![Probe::Wheel { index: 0 }],
            config_hash: 0,
        };
        let mut integ = BatheIntegrator::new(&args, ContactMode::Bilateral).unwrap();
        for n in 0..200 {
            integ.step().unwrap();
            let t = (n + 1) as f64 * 1e-3;
            assert_relative_eq!(integ.state.u_t[0], -1e-3 * (8.0 * t).sin(), epsilon = 1e-12);
        }
    }

    #[test]
    fn backward_euler_substep_adds_numerical_damping() {
        // Free undamped oscillator at a coarse step: the composite scheme
        // bleeds energy while the trapezoidal-only scheme keeps amplitude.
        let (m, k) = (1.0, (2.0 * std::f64::consts::PI * 50.0_f64).powi(2)); // 50 Hz
        let dt = 0.01; // ωΔt ≈ 3.1
        let bridge = tiny_bridge();
        let path = NoConstraint {
            n_bridge: bridge.n_free(),
        };
        let train = sdof_train(m, 0.0, k);
        let args = sdof_args(&train, &bridge, &path, dt);
        let mut bathe = BatheIntegrator::new(&args, ContactMode::Bilateral).unwrap();
        bathe.state.u_t[0] = 1.0;
        bathe.state.a_t[0] = -k / m;
        let mut bauchau = crate::bauchau::BauchauIntegrator::new(&args).unwrap();
        bauchau.state.u_t[0] = 1.0;
        for _ in 0..400 {
            bathe.step().unwrap();
            bauchau.step().unwrap();
        }
        let mut bathe_amp = 0.0_f64;
        let mut bauchau_amp = 0.0_f64;
        for _ in 0..200 {
            bathe.step().unwrap();
            bauchau.step().unwrap();
            bathe_amp = bathe_amp.max(bathe.state.u_t[0].abs());
            bauchau_amp = bauchau_amp.max(bauchau.state.u_t[0].abs());
        }
        assert!(
            bathe_amp < 0.05,
            "composite scheme should have damped the mode, amp = {bathe_amp}"
        );
        assert!(
            bauchau_amp > 0.95,
            "trapezoidal scheme should preserve amplitude, amp = {bauchau_amp}"
        );
    }

    #[test]
    fn spectral_radius_at_most_one() {
        // Amplification-matrix spectral radius of one composite step on
        // ü = −ω²u stays ≤ 1 over eight decades of ωΔt.
        let bridge = tiny_bridge();
        let path = NoConstraint {
            n_bridge: bridge.n_free(),
        };
        for &wdt in &[1e-3, 1e-2, 1e-1, 1.0, 3.0, 1e1, 1e2, 1e3] {
            let dt = 0.01;
            let w = wdt / dt;
            let train = sdof_train(1.0, 0.0, w * w);
            let args = sdof_args(&train, &bridge, &path, dt);
            // Columns of the one-step map from unit initial states; scale
            // v and a by Δt to keep the map dimensionless.
            let mut map = DMatrix::<f64>::zeros(3, 3);
            for (col, init) in [(0, (1.0, 0.0, 0.0)), (1, (0.0, 1.0, 0.0)), (2, (0.0, 0.0, 1.0))]
            {
                let mut integ = BatheIntegrator::new(&args, ContactMode::Bilateral).unwrap();
                integ.state.u_t[0] = init.0;
                integ.state.v_t[0] = init.1 / dt;
                integ.state.a_t[0] = init.2 / (dt * dt);
                integ.step().unwrap();
                map[(0, col)] = integ.state.u_t[0];
                map[(1, col)] = integ.state.v_t[0] * dt;
                map[(2, col)] = integ.state.a_t[0] * dt * dt;
            }
            let rho = map
                .complex_eigenvalues()
                .iter()
                .map(|z| z.norm())
                .fold(0.0_f64, f64::max);
            assert!(rho <= 1.0 + 1e-9, "ρ({wdt}) = {rho}");
        }
    }
}
