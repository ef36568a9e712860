//! Simulation traces: probed displacement/velocity/acceleration series,
//! the full contact-force history, and CSV persistence.

use std::io::Write;

use nalgebra::DVector;

use crate::bridge::BridgeModel;
use crate::coupling::ConstraintPath;
use crate::error::{Result, VtsiError};
use crate::train::TrainModel;

/// A recorded quantity. Bridge probes address the deflection DOF of the
/// node nearest the given coordinate; wheel probes address a wheel heave
/// DOF; train probes address a raw train DOF index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Probe {
    BridgeDeflection { x: f64 },
    Wheel { index: usize },
    TrainDof { index: usize },
}

impl Probe {
    pub fn label(&self) -> String {
        match self {
            Probe::BridgeDeflection { x } => format!("bridge:{x}"),
            Probe::Wheel { index } => format!("wheel:{index}"),
            Probe::TrainDof { index } => format!("train:{index}"),
        }
    }

    /// Parses `bridge:<x>`, `wheel:<i>` or `train:<i>`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| VtsiError::InvalidConfig(format!("bad probe `{s}`")))?;
        match kind {
            "bridge" => arg
                .parse()
                .map(|x| Probe::BridgeDeflection { x })
                .map_err(|_| VtsiError::InvalidConfig(format!("bad probe position `{arg}`"))),
            "wheel" => arg
                .parse()
                .map(|index| Probe::Wheel { index })
                .map_err(|_| VtsiError::InvalidConfig(format!("bad wheel index `{arg}`"))),
            "train" => arg
                .parse()
                .map(|index| Probe::TrainDof { index })
                .map_err(|_| VtsiError::InvalidConfig(format!("bad train DOF `{arg}`"))),
            _ => Err(VtsiError::InvalidConfig(format!("unknown probe kind `{kind}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Target {
    Train(usize),
    Bridge(usize),
}

/// A probe bound to a concrete DOF of the models.
#[derive(Debug, Clone)]
pub struct ResolvedProbe {
    pub label: String,
    target: Target,
}

pub fn resolve_probes(
    probes: &[Probe],
    train: &TrainModel,
    bridge: &BridgeModel,
) -> Result<Vec<ResolvedProbe>> {
    probes
        .iter()
        .map(|p| {
            let target = match *p {
                Probe::BridgeDeflection { x } => Target::Bridge(bridge.deflection_dof_near(x)?),
                Probe::Wheel { index } => {
                    let dof = *train.wheel_dofs.get(index).ok_or_else(|| {
                        VtsiError::InvalidConfig(format!("wheel index {index} out of range"))
                    })?;
                    Target::Train(dof)
                }
                Probe::TrainDof { index } => {
                    if index >= train.n_dof() {
                        return Err(VtsiError::InvalidConfig(format!(
                            "train DOF {index} out of range"
                        )));
                    }
                    Target::Train(index)
                }
            };
            Ok(ResolvedProbe {
                label: p.label(),
                target,
            })
        })
        .collect()
}

/// One probed series; increments about the static state.
#[derive(Debug, Clone)]
pub struct ProbeSeries {
    pub label: String,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

/// Worst-case unilateral-contact diagnostics folded over a run.
#[derive(Debug, Clone, Copy, Default)]
pub struct ContactDiagnostics {
    /// Most negative contact force seen (0 when none were negative).
    pub min_lambda: f64,
    /// Most negative gap seen, i.e. the worst penetration (0 when none).
    pub min_gap: f64,
    /// Largest complementarity product |λᵀ·gap|.
    pub max_complementarity: f64,
}

impl ContactDiagnostics {
    pub fn fold(&mut self, min_lambda: f64, min_gap: f64, comp: f64) {
        self.min_lambda = self.min_lambda.min(min_lambda);
        self.min_gap = self.min_gap.min(min_gap);
        self.max_complementarity = self.max_complementarity.max(comp);
    }
}

/// Time series produced by one simulation run.
///
/// Row 0 is the static initial state. The contact forces are total support
/// reactions per wheel: the bridge contact force while the wheel is on the
/// span, the rigid-ground reaction otherwise.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub scheme: String,
    pub config_hash: u64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub probes: Vec<ProbeSeries>,
    /// Contact forces, one vector per recorded time.
    pub lambda: Vec<DVector<f64>>,
    /// Offset of the multiplier instants relative to `times` (the
    /// mid-step scheme reports λ at `t − Δt/2`).
    pub lambda_time_shift: f64,
    /// Mid-step contact forces where the scheme produces them.
    pub lambda_half: Option<Vec<DVector<f64>>>,
    /// Per-wheel on-span flags, aligned with `times`.
    pub active: Vec<Vec<bool>>,
    /// max over steps of ‖L^t u^t + L^b u^b + ρ‖∞ / max(1, ‖u‖∞).
    pub max_scaled_residual: f64,
    /// Present on runs with unilateral contact.
    pub contact: Option<ContactDiagnostics>,
}

impl SimulationTrace {
    pub fn n_wheels(&self) -> usize {
        self.lambda.first().map_or(0, |l| l.len())
    }

    pub fn probe(&self, label: &str) -> Option<&ProbeSeries> {
        self.probes.iter().find(|p| p.label == label)
    }

    /// Contact-force history of one wheel.
    pub fn lambda_series(&self, wheel: usize) -> Vec<f64> {
        self.lambda.iter().map(|l| l[wheel]).collect()
    }

    /// Writes the trace as CSV: `t,u:<p>,v:<p>,a:<p>,...,lambda_1..k` with
    /// 15 significant digits, after a `#` metadata comment line.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(
            out,
            "# scheme={} config={:016x} dt={:.6e}",
            self.scheme, self.config_hash, self.dt
        )?;
        let mut header = String::from("t");
        for p in &self.probes {
            header.push_str(&format!(",u:{0},v:{0},a:{0}", p.label));
        }
        for i in 1..=self.n_wheels() {
            header.push_str(&format!(",lambda_{i}"));
        }
        writeln!(out, "{header}")?;
        for (row, &t) in self.times.iter().enumerate() {
            let mut line = format!("{t:.14e}");
            for p in &self.probes {
                line.push_str(&format!(
                    ",{:.14e},{:.14e},{:.14e}",
                    p.u[row], p.v[row], p.a[row]
                ));
            }
            for w in 0..self.n_wheels() {
                line.push_str(&format!(",{:.14e}", self.lambda[row][w]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut out)
    }
}

/// Accumulates trace rows during a run.
pub struct TraceRecorder {
    resolved: Vec<ResolvedProbe>,
    trace: SimulationTrace,
}

/// Full dynamic state of both subsystems at one instant (increments about
/// the static solution).
#[derive(Debug, Clone)]
pub struct FullState {
    pub t: f64,
    pub u_t: DVector<f64>,
    pub v_t: DVector<f64>,
    pub a_t: DVector<f64>,
    pub u_b: DVector<f64>,
    pub v_b: DVector<f64>,
    pub a_b: DVector<f64>,
}

impl FullState {
    pub fn at_rest(t: f64, n_t: usize, n_b: usize) -> Self {
        Self {
            t,
            u_t: DVector::zeros(n_t),
            v_t: DVector::zeros(n_t),
            a_t: DVector::zeros(n_t),
            u_b: DVector::zeros(n_b),
            v_b: DVector::zeros(n_b),
            a_b: DVector::zeros(n_b),
        }
    }

    /// ∞-norm over all displacement increments.
    pub fn displacement_norm(&self) -> f64 {
        self.u_t
            .iter()
            .chain(self.u_b.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl TraceRecorder {
    pub fn new(
        scheme: &str,
        config_hash: u64,
        dt: f64,
        probes: &[Probe],
        train: &TrainModel,
        bridge: &BridgeModel,
        lambda_time_shift: f64,
    ) -> Result<Self> {
        let resolved = resolve_probes(probes, train, bridge)?;
        let probes = resolved
            .iter()
            .map(|r| ProbeSeries {
                label: r.label.clone(),
                u: Vec::new(),
                v: Vec::new(),
                a: Vec::new(),
            })
            .collect();
        Ok(Self {
            resolved,
            trace: SimulationTrace {
                scheme: scheme.to_owned(),
                config_hash,
                dt,
                times: Vec::new(),
                probes,
                lambda: Vec::new(),
                lambda_time_shift,
                lambda_half: None,
                active: Vec::new(),
                max_scaled_residual: 0.0,
                contact: None,
            },
        })
    }

    pub fn record(
        &mut self,
        state: &FullState,
        lambda: &DVector<f64>,
        active: &[bool],
        scaled_residual: f64,
    ) {
        self.trace.times.push(state.t);
        self.trace.lambda.push(lambda.clone());
        self.trace.active.push(active.to_vec());
        self.trace.max_scaled_residual = self.trace.max_scaled_residual.max(scaled_residual);
        for (series, probe) in self.trace.probes.iter_mut().zip(&self.resolved) {
            let (u, v, a) = match probe.target {
                Target::Train(d) => (state.u_t[d], state.v_t[d], state.a_t[d]),
                Target::Bridge(d) => (state.u_b[d], state.v_b[d], state.a_b[d]),
            };
            series.u.push(u);
            series.v.push(v);
            series.a.push(a);
        }
    }

    pub fn push_lambda_half(&mut self, lambda: DVector<f64>) {
        self.trace
            .lambda_half
            .get_or_insert_with(Vec::new)
            .push(lambda);
    }

    pub fn set_contact_diagnostics(&mut self, d: ContactDiagnostics) {
        self.trace.contact = Some(d);
    }

    pub fn finish(self) -> SimulationTrace {
        self.trace
    }
}

/// Shared arguments for the time-stepping runners.
pub struct SimArgs<'a> {
    pub train: &'a TrainModel,
    pub bridge: &'a BridgeModel,
    pub path: &'a dyn ConstraintPath,
    pub dt: f64,
    pub t_end: f64,
    pub probes: Vec<Probe>,
    pub config_hash: u64,
}

impl SimArgs<'_> {
    pub fn n_steps(&self) -> Result<usize> {
        if self.dt <= 0.0 || self.t_end <= 0.0 {
            return Err(VtsiError::InvalidConfig(
                "time step and horizon must be positive".into(),
            ));
        }
        Ok((self.t_end / self.dt).round().max(1.0) as usize)
    }
}
