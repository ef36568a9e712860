//! Independent verification paths for the production schemes.
//!
//! Two cross checks, sharing only the model assembly with the primary
//! integrators:
//!
//! - [`run_bdf`]: fixed-step BDF1/BDF2 applied to the first-order residual
//!   form of the index-3 DAE, solved monolithically per step through one
//!   bordered linear system in `(u^t, u^b, λ)`.
//! - [`run_direct`]: the direct coupling obtained by partitioning the
//!   train, eliminating the multiplier and the wheel DOFs through the
//!   constraint, and stepping the remaining (carriage ⊕ bridge) system
//!   with the trapezoidal rule. The bridge matrices pick up wheel inertia
//!   and damping terms through `L^b`, `L̇^b`, `L̈^b`, must be rebuilt every
//!   step, and are not symmetric while a wheel sits mid-element.

use nalgebra::{DMatrix, DVector};

use crate::coupling::{CouplingState, MovingWheels};
use crate::error::{Result, VtsiError};
use crate::statics::static_init;
use crate::system::SecondOrderSystem;
use crate::trace::{FullState, SimArgs, SimulationTrace, TraceRecorder};

/// First-order state `y = (u^t, u^b, v^t, v^b)` of the residual form.
#[derive(Debug, Clone)]
pub struct DaeState {
    pub u_t: DVector<f64>,
    pub u_b: DVector<f64>,
    pub v_t: DVector<f64>,
    pub v_b: DVector<f64>,
}

/// Time derivative ẏ.
#[derive(Debug, Clone)]
pub struct DaeRates {
    pub ud_t: DVector<f64>,
    pub ud_b: DVector<f64>,
    pub vd_t: DVector<f64>,
    pub vd_b: DVector<f64>,
}

/// Residual blocks of the coupled DAE:
///
/// ```text
/// F₁ = Mᵗv̇ᵗ + Cᵗvᵗ + Kᵗuᵗ + L^tᵀλ − Pᵗ
/// F₂ = Mᵇv̇ᵇ + Cᵇvᵇ + Kᵇuᵇ + L^bᵀλ − Pᵇ
/// F₃ = vᵗ − u̇ᵗ
/// F₄ = vᵇ − u̇ᵇ
/// F₅ = Lᵗuᵗ + Lᵇ(t)uᵇ + ρ(t)
/// ```
pub struct DaeResidual {
    pub f1: DVector<f64>,
    pub f2: DVector<f64>,
    pub f3: DVector<f64>,
    pub f4: DVector<f64>,
    pub f5: DVector<f64>,
}

impl DaeResidual {
    pub fn max_norm(&self) -> f64 {
        [&self.f1, &self.f2, &self.f3, &self.f4, &self.f5]
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

/// Evaluates the residual blocks for given state, rates and multiplier.
/// `train_sys`/`bridge_sys` carry the effective loads of the increment
/// form (so the residual of the static solution is zero).
pub fn dae_residual(
    train_sys: &SecondOrderSystem,
    bridge_sys: &SecondOrderSystem,
    wheel_dofs: &[usize],
    cs: &CouplingState,
    y: &DaeState,
    ydot: &DaeRates,
    lambda: &DVector<f64>,
) -> DaeResidual {
    let mut lt_lambda = DVector::zeros(train_sys.n_dof);
    let mut lt_u = DVector::zeros(wheel_dofs.len());
    for (i, &d) in wheel_dofs.iter().enumerate() {
        lt_lambda[d] = lambda[i];
        lt_u[i] = y.u_t[d];
    }
    DaeResidual {
        f1: &train_sys.m * &ydot.vd_t
            + &train_sys.c * &y.v_t
            + &train_sys.k * &y.u_t
            + &lt_lambda
            - &train_sys.p,
        f2: &bridge_sys.m * &ydot.vd_b
            + &bridge_sys.c * &y.v_b
            + &bridge_sys.k * &y.u_b
            + cs.lb.transpose() * lambda
            - &bridge_sys.p,
        f3: &y.v_t - &ydot.ud_t,
        f4: &y.v_b - &ydot.ud_b,
        f5: lt_u + &cs.lb * &y.u_b + &cs.rho,
    }
}

/// Backward-differentiation order for [`run_bdf`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdfOrder {
    One,
    Two,
}

/// Integrates the index-3 system with fixed-step BDF, solving the bordered
/// `(uᵗ, uᵇ, λ)` system by dense LU every step (the influence rows move).
/// BDF2 bootstraps its history with one BDF1 step.
pub fn run_bdf(args: &SimArgs<'_>, order: BdfOrder) -> Result<SimulationTrace> {
    let n_steps = args.n_steps()?;
    let dt = args.dt;
    let train = args.train;
    let bridge = args.bridge;
    let n_t = train.n_dof();
    let n_b = bridge.n_free();
    let n_w = train.n_wheels();
    let statics = static_init(train, bridge, args.path, 0.0)?;
    let train_sys = train.system.with_load(statics.train_load.clone());
    let bridge_sys = bridge.system.with_load(DVector::zeros(n_b));

    let scheme = match order {
        BdfOrder::One => "oracle-bdf1",
        BdfOrder::Two => "oracle-bdf2",
    };
    let mut recorder = TraceRecorder::new(
        scheme,
        args.config_hash,
        dt,
        &args.probes,
        train,
        bridge,
        0.0,
    )?;

    let mut state = FullState::at_rest(0.0, n_t, n_b);
    state.u_t = statics.train_u0.clone();
    state.u_b = statics.bridge_u0.clone();
    let s0 = args.path.state_at(0.0);
    recorder.record(&state, &statics.lambda, &s0.active, 0.0);

    // One-step history for BDF2.
    let mut prev = state.clone();

    for step in 0..n_steps {
        let t_next = (step + 1) as f64 * dt;
        let cs = args.path.state_at(t_next);
        let use_bdf2 = order == BdfOrder::Two && step > 0;

        // v = α·u + r_u with the scheme-dependent history terms.
        let (alpha, ru_t, ru_b, rv_t, rv_b) = if use_bdf2 {
            let a = 3.0 / (2.0 * dt);
            (
                a,
                (&prev.u_t - &state.u_t * 4.0) / (2.0 * dt),
                (&prev.u_b - &state.u_b * 4.0) / (2.0 * dt),
                (&prev.v_t - &state.v_t * 4.0) / (2.0 * dt),
                (&prev.v_b - &state.v_b * 4.0) / (2.0 * dt),
            )
        } else {
            let a = 1.0 / dt;
            (
                a,
                -&state.u_t / dt,
                -&state.u_b / dt,
                -&state.v_t / dt,
                -&state.v_b / dt,
            )
        };

        // (α²M + αC + K)u + Lᵀλ = P − M(α·r_u + r_v) − C·r_u.
        let kbar_t = &train_sys.m * (alpha * alpha) + &train_sys.c * alpha + &train_sys.k;
        let kbar_b = &bridge_sys.m * (alpha * alpha) + &bridge_sys.c * alpha + &bridge_sys.k;
        let rhs_t = &train_sys.p - &train_sys.m * (&ru_t * alpha + &rv_t) - &train_sys.c * &ru_t;
        let rhs_b = -(&bridge_sys.m * (&ru_b * alpha + &rv_b)) - &bridge_sys.c * &ru_b;

        let dim = n_t + n_b + n_w;
        let mut a_mat = DMatrix::<f64>::zeros(dim, dim);
        a_mat.view_mut((0, 0), (n_t, n_t)).copy_from(&kbar_t);
        a_mat.view_mut((n_t, n_t), (n_b, n_b)).copy_from(&kbar_b);
        for (i, &d) in train.wheel_dofs.iter().enumerate() {
            a_mat[(d, n_t + n_b + i)] = 1.0;
            a_mat[(n_t + n_b + i, d)] = 1.0;
        }
        a_mat
            .view_mut((n_t, n_t + n_b), (n_b, n_w))
            .copy_from(&cs.lb.transpose());
        a_mat
            .view_mut((n_t + n_b, n_t), (n_w, n_b))
            .copy_from(&cs.lb);
        let mut rhs = DVector::zeros(dim);
        rhs.rows_mut(0, n_t).copy_from(&rhs_t);
        rhs.rows_mut(n_t, n_b).copy_from(&rhs_b);
        rhs.rows_mut(n_t + n_b, n_w).copy_from(&(-&cs.rho));

        let sol = a_mat.lu().solve(&rhs).ok_or(VtsiError::SingularCoupling {
            step,
            time: t_next,
            detail: "singular bordered BDF matrix".into(),
        })?;
        let u_t = sol.rows(0, n_t).into_owned();
        let u_b = sol.rows(n_t, n_b).into_owned();
        let lambda = sol.rows(n_t + n_b, n_w).into_owned();
        let v_t = &u_t * alpha + &ru_t;
        let v_b = &u_b * alpha + &ru_b;
        let a_t = (&v_t * alpha + &rv_t).clone();
        let a_b = (&v_b * alpha + &rv_b).clone();

        prev = state.clone();
        state = FullState {
            t: t_next,
            u_t,
            v_t,
            a_t,
            u_b,
            v_b,
            a_b,
        };
        let r = train.wheel_values(&state.u_t) + &cs.lb * &state.u_b + &cs.rho;
        let scaled = if r.is_empty() {
            0.0
        } else {
            r.amax() / state.displacement_norm().max(1.0)
        };
        recorder.record(&state, &lambda, &cs.active, scaled);
    }
    Ok(recorder.finish())
}

/// Integrates the directly-coupled (multiplier-free) formulation with the
/// trapezoidal rule, rebuilding the modified matrices every step. Requires
/// the Hermite influence construction for the analytic `L̇ᵇ`, `L̈ᵇ`.
pub fn run_direct(
    args: &SimArgs<'_>,
    moving: &MovingWheels<'_>,
) -> Result<SimulationTrace> {
    let n_steps = args.n_steps()?;
    let dt = args.dt;
    let train = args.train;
    let bridge = args.bridge;
    let statics = static_init(train, bridge, args.path, 0.0)?;
    let part = train.partitioned()?;
    let carriage = &train.partition.carriage;
    let wheels = &train.partition.wheels;
    let n_c = carriage.len();
    let n_b = bridge.n_free();
    if train.wheel_dofs != *wheels {
        return Err(VtsiError::InvalidModel(
            "direct coupling expects the wheel partition to list the wheel DOFs in order".into(),
        ));
    }

    let mut recorder = TraceRecorder::new(
        "oracle-direct",
        args.config_hash,
        dt,
        &args.probes,
        train,
        bridge,
        0.0,
    )?;

    // Static wheel loads are the effective load on the wheel rows.
    let lambda_s = statics.wheel_loads.clone();

    // z = (w^c, w^b). Assembles the time-dependent coupled system.
    let assemble = |d: &crate::coupling::PathDerivatives| {
        let lb = &d.state.lb;
        let lb_t = lb.transpose();
        let m_z = {
            let mut m = DMatrix::zeros(n_c + n_b, n_c + n_b);
            m.view_mut((0, 0), (n_c, n_c)).copy_from(&part.m_cc);
            m.view_mut((n_c, n_c), (n_b, n_b))
                .copy_from(&(&bridge.system.m + &lb_t * &part.m_ww * lb));
            m
        };
        let c_z = {
            let mut c = DMatrix::zeros(n_c + n_b, n_c + n_b);
            c.view_mut((0, 0), (n_c, n_c)).copy_from(&part.c_cc);
            c.view_mut((0, n_c), (n_c, n_b))
                .copy_from(&(-(&part.c_cw * lb)));
            c.view_mut((n_c, 0), (n_b, n_c))
                .copy_from(&(-(&lb_t * &part.c_wc)));
            c.view_mut((n_c, n_c), (n_b, n_b)).copy_from(
                &(&bridge.system.c + &lb_t * &part.c_ww * lb + (&lb_t * &part.m_ww * &d.lb_d1) * 2.0),
            );
            c
        };
        let k_z = {
            let mut k = DMatrix::zeros(n_c + n_b, n_c + n_b);
            k.view_mut((0, 0), (n_c, n_c)).copy_from(&part.k_cc);
            k.view_mut((0, n_c), (n_c, n_b))
                .copy_from(&(-(&part.c_cw * &d.lb_d1 + &part.k_cw * lb)));
            k.view_mut((n_c, 0), (n_b, n_c))
                .copy_from(&(-(&lb_t * &part.k_wc)));
            k.view_mut((n_c, n_c), (n_b, n_b)).copy_from(
                &(&bridge.system.k
                    + &lb_t * &part.k_ww * lb
                    + &lb_t * &part.c_ww * &d.lb_d1
                    + &lb_t * &part.m_ww * &d.lb_d2),
            );
            k
        };
        let p_z = {
            let mut p = DVector::zeros(n_c + n_b);
            p.rows_mut(0, n_c)
                .copy_from(&(&part.c_cw * &d.rho_d1 + &part.k_cw * &d.state.rho));
            let wheel_track = &lambda_s
                + &part.m_ww * &d.rho_d2
                + &part.c_ww * &d.rho_d1
                + &part.k_ww * &d.state.rho;
            p.rows_mut(n_c, n_b).copy_from(&(-(&lb_t * wheel_track)));
            p
        };
        (m_z, c_z, k_z, p_z)
    };

    // Initial state: increments about statics (zero for an off-span
    // start); recover a₀ from the assembled system.
    let d0 = moving.state_with_derivatives(0.0);
    let (m0, c0, k0, p0) = assemble(&d0);
    let mut z = DVector::zeros(n_c + n_b);
    for (bi, &d) in carriage.iter().enumerate() {
        z[bi] = statics.train_u0[d];
    }
    z.rows_mut(n_c, n_b).copy_from(&statics.bridge_u0);
    let mut zv = DVector::zeros(n_c + n_b);
    let mut za = m0
        .clone()
        .lu()
        .solve(&(&p0 - &c0 * &zv - &k0 * &z))
        .ok_or_else(|| VtsiError::SingularStatics("direct mass matrix is singular".into()))?;

    // Recovers the full train state and λ from the reduced variables.
    let recover = |d: &crate::coupling::PathDerivatives,
                   z: &DVector<f64>,
                   zv: &DVector<f64>,
                   za: &DVector<f64>| {
        let w_b = z.rows(n_c, n_b).into_owned();
        let wv_b = zv.rows(n_c, n_b).into_owned();
        let wa_b = za.rows(n_c, n_b).into_owned();
        let lb = &d.state.lb;
        let u_w = -(lb * &w_b) - &d.state.rho;
        let v_w = -(&d.lb_d1 * &w_b) - lb * &wv_b - &d.rho_d1;
        let a_w = -(&d.lb_d2 * &w_b) - (&d.lb_d1 * &wv_b) * 2.0 - lb * &wa_b - &d.rho_d2;
        let w_c = z.rows(0, n_c).into_owned();
        let wv_c = zv.rows(0, n_c).into_owned();
        let wa_c = za.rows(0, n_c).into_owned();
        // λ = λ_s − (M^w a_w + C^wc v_c + C^w v_w + K^wc u_c + K^w u_w).
        let lambda = &lambda_s
            - (&part.m_ww * &a_w
                + &part.c_wc * &wv_c
                + &part.c_ww * &v_w
                + &part.k_wc * &w_c
                + &part.k_ww * &u_w);
        let mut full = FullState::at_rest(d.state.t, train.n_dof(), n_b);
        for (bi, &dof) in carriage.iter().enumerate() {
            full.u_t[dof] = w_c[bi];
            full.v_t[dof] = wv_c[bi];
            full.a_t[dof] = wa_c[bi];
        }
        for (bi, &dof) in wheels.iter().enumerate() {
            full.u_t[dof] = u_w[bi];
            full.v_t[dof] = v_w[bi];
            full.a_t[dof] = a_w[bi];
        }
        full.u_b = w_b;
        full.v_b = wv_b;
        full.a_b = wa_b;
        (full, lambda)
    };

    let (state0, _) = recover(&d0, &z, &zv, &za);
    recorder.record(&state0, &statics.lambda, &d0.state.active, 0.0);

    for step in 0..n_steps {
        let t_next = (step + 1) as f64 * dt;
        let d = moving.state_with_derivatives(t_next);
        let (m, c, k, p) = assemble(&d);
        // Trapezoidal (average-acceleration) predictors.
        let z_pred = &z + &zv * dt + &za * (dt * dt / 4.0);
        let zv_pred = &zv + &za * (dt / 2.0);
        let eff = &m + &c * (dt / 2.0) + &k * (dt * dt / 4.0);
        let rhs = &p - &c * &zv_pred - &k * &z_pred;
        let za_next = eff.lu().solve(&rhs).ok_or(VtsiError::SingularCoupling {
            step,
            time: t_next,
            detail: "singular direct-coupling effective matrix".into(),
        })?;
        z = z_pred + &za_next * (dt * dt / 4.0);
        zv = zv_pred + &za_next * (dt / 2.0);
        za = za_next;

        let (full, lambda) = recover(&d, &z, &zv, &za);
        let r = train.wheel_values(&full.u_t) + &d.state.lb * &full.u_b + &d.state.rho;
        let scaled = if r.is_empty() {
            0.0
        } else {
            r.amax() / full.displacement_norm().max(1.0)
        };
        recorder.record(&full, &lambda, &d.state.active, scaled);
    }
    Ok(recorder.finish())
}
