//! Scenario configuration, the built-in analysis-case catalog, run
//! dispatch over the available schemes, speed sweeps and mesh/time-step
//! convergence studies.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bathe::{self, ContactMode};
use crate::bauchau;
use crate::bridge::{Approach, BcKind, BridgeModel};
use crate::coupling::{ConstraintInterp, MovingWheels};
use crate::error::{Result, VtsiError};
use crate::irregularity::{IrregularityProfile, PsdParams, TrackIrregularity, CLASS6_TOLERANCE};
use crate::metrics::relative_linf;
use crate::reference::{self, BdfOrder};
use crate::trace::{Probe, SimArgs, SimulationTrace};
use crate::train::{CarSpec, TrainModel};

/// Time integration scheme selector. The `oracle-*` entries are the
/// independent reference solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Bauchau,
    Bathe,
    OracleBdf1,
    OracleBdf2,
    OracleDirect,
}

impl Scheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bauchau" => Ok(Scheme::Bauchau),
            "bathe" => Ok(Scheme::Bathe),
            "oracle-bdf1" => Ok(Scheme::OracleBdf1),
            "oracle-bdf2" => Ok(Scheme::OracleBdf2),
            "oracle-direct" => Ok(Scheme::OracleDirect),
            _ => Err(VtsiError::InvalidConfig(format!("unknown scheme `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContactConfig {
    Bilateral,
    Lcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpConfig {
    Hermite,
    Bspline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BcConfig {
    Fixed,
    SimplySupported,
}

/// Geometry the rail is referenced to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackDatum {
    /// Track laid straight on the unloaded structure; wheels ride the
    /// dead-load sag, which acts as a smooth excitation profile.
    UnloadedGeometry,
    /// Track laid level on the dead-loaded deck; only irregularities and
    /// live deflections excite the wheels.
    DeadLoad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeConfig {
    /// `(length_m, elements)` per span, left to right.
    pub spans: Vec<(f64, usize)>,
    /// Young's modulus (Pa).
    pub e_modulus: f64,
    /// Second moment of area (m⁴).
    pub inertia: f64,
    /// Mass per unit length (kg/m).
    pub mass_per_length: f64,
    pub bc: BcConfig,
    /// Fully fixed track elements appended beyond each end (element length
    /// matches the first span's mesh).
    #[serde(default)]
    pub approach_elements: usize,
    /// Rayleigh damping ratio in the first two modes.
    #[serde(default = "default_damping_ratio")]
    pub damping_ratio: f64,
}

fn default_damping_ratio() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarConfig {
    pub carriage_mass: f64,
    pub pitch_inertia: f64,
    pub wheel_mass: f64,
    pub suspension_stiffness: f64,
    /// Defaults to 5% of critical: 0.05·√(k_s·m_c).
    #[serde(default)]
    pub suspension_damping: Option<f64>,
    pub axle_spacing: f64,
    pub car_length: f64,
}

impl CarConfig {
    pub fn to_spec(&self) -> CarSpec {
        CarSpec {
            carriage_mass: self.carriage_mass,
            pitch_inertia: self.pitch_inertia,
            wheel_mass: self.wheel_mass,
            suspension_stiffness: self.suspension_stiffness,
            suspension_damping: self.suspension_damping.unwrap_or_else(|| {
                0.05 * (self.suspension_stiffness * self.carriage_mass).sqrt()
            }),
            axle_spacing: self.axle_spacing,
            car_length: self.car_length,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Inter-car wheel gaps; defaults to bumper-to-bumper spacing.
    #[serde(default)]
    pub gaps: Option<Vec<f64>>,
    /// Articulation: DOF pairs `(keep, remove)` merged across the train.
    #[serde(default)]
    pub shared_dofs: Option<Vec<(usize, usize)>>,
    /// Identical cars repeated `count` times (rear to front).
    #[serde(default = "default_count")]
    pub count: usize,
    pub cars: Vec<CarConfig>,
}

fn default_count() -> usize {
    1
}

impl TrainConfig {
    fn specs(&self) -> Vec<CarSpec> {
        let base: Vec<CarSpec> = self.cars.iter().map(CarConfig::to_spec).collect();
        let mut all = Vec::with_capacity(base.len() * self.count);
        for _ in 0..self.count {
            all.extend(base.iter().copied());
        }
        all
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Train speed (m/s), constant.
    pub speed: f64,
    /// Start position of the rear-most wheel; defaults so the lead wheel
    /// sits at the bridge start at t = 0.
    #[serde(default)]
    pub start_position: Option<f64>,
    /// Time step (s).
    pub dt: f64,
    /// Horizon (s); defaults to a full crossing plus a short tail.
    #[serde(default)]
    pub t_end: Option<f64>,
    pub scheme: Scheme,
    #[serde(default = "default_interp")]
    pub constraint_interp: InterpConfig,
    #[serde(default = "default_contact")]
    pub contact: ContactConfig,
    #[serde(default = "default_datum")]
    pub track_datum: TrackDatum,
}

fn default_interp() -> InterpConfig {
    InterpConfig::Hermite
}

fn default_contact() -> ContactConfig {
    ContactConfig::Bilateral
}

fn default_datum() -> TrackDatum {
    TrackDatum::UnloadedGeometry
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrregularityConfig {
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_roughness")]
    pub roughness: f64,
    #[serde(default = "default_omega_r")]
    pub omega_r: f64,
    #[serde(default = "default_omega_c")]
    pub omega_c: f64,
    #[serde(default = "default_omega_l")]
    pub omega_l: f64,
    #[serde(default = "default_omega_u")]
    pub omega_u: f64,
    #[serde(default = "default_n_freq")]
    pub n_freq: usize,
}

fn default_tolerance() -> f64 {
    CLASS6_TOLERANCE
}
fn default_roughness() -> f64 {
    PsdParams::default().roughness
}
fn default_omega_r() -> f64 {
    PsdParams::default().omega_r
}
fn default_omega_c() -> f64 {
    PsdParams::default().omega_c
}
fn default_omega_l() -> f64 {
    PsdParams::default().omega_l
}
fn default_omega_u() -> f64 {
    PsdParams::default().omega_u
}
fn default_n_freq() -> usize {
    PsdParams::default().n_freq
}

impl IrregularityConfig {
    pub fn psd_params(&self) -> PsdParams {
        PsdParams {
            roughness: self.roughness,
            omega_r: self.omega_r,
            omega_c: self.omega_c,
            omega_l: self.omega_l,
            omega_u: self.omega_u,
            n_freq: self.n_freq,
        }
    }
}

/// A complete simulation description; serializable to a TOML file with
/// unknown keys rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Probes as `bridge:<x>`, `wheel:<i>`, `train:<dof>`; defaults to
    /// the first-span midpoint plus every wheel.
    #[serde(default)]
    pub probes: Vec<String>,
    pub bridge: BridgeConfig,
    pub train: TrainConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub irregularity: Option<IrregularityConfig>,
}

/// Models and constraint data instantiated from a config.
pub struct BuiltScenario {
    pub bridge: BridgeModel,
    pub train: TrainModel,
    pub profile: Option<Arc<dyn TrackIrregularity>>,
    pub start: f64,
    pub t_end: f64,
    pub probes: Vec<Probe>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| VtsiError::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// FNV-1a hash of the canonical serialized form; stamped into traces
    /// for reproducibility checks.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_toml().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    fn validate(&self) -> Result<()> {
        if self.run.dt <= 0.0 {
            return Err(VtsiError::InvalidConfig("dt must be positive".into()));
        }
        if let Some(t) = self.run.t_end {
            if t <= 0.0 {
                return Err(VtsiError::InvalidConfig("t_end must be positive".into()));
            }
        }
        if self.run.speed < 0.0 {
            return Err(VtsiError::InvalidConfig("speed must be non-negative".into()));
        }
        if self.run.constraint_interp == InterpConfig::Bspline
            && self.bridge.bc == BcConfig::SimplySupported
        {
            return Err(VtsiError::Unsupported(
                "spline constraint interpolation requires fixed ends".into(),
            ));
        }
        if self.run.contact == ContactConfig::Lcp && self.run.scheme != Scheme::Bathe {
            return Err(VtsiError::Unsupported(
                "contact separation is formulated on the composite (bathe) scheme".into(),
            ));
        }
        if self.run.scheme == Scheme::OracleDirect
            && self.run.constraint_interp != InterpConfig::Hermite
        {
            return Err(VtsiError::Unsupported(
                "the direct-coupling solver needs analytic Hermite row derivatives".into(),
            ));
        }
        if self.train.cars.is_empty() || self.train.count == 0 {
            return Err(VtsiError::InvalidConfig("train has no cars".into()));
        }
        Ok(())
    }

    /// Instantiates the models.
    pub fn build(&self) -> Result<BuiltScenario> {
        self.validate()?;
        let approach = if self.bridge.approach_elements > 0 {
            let (l0, n0) = self.bridge.spans[0];
            Some(Approach {
                n_elements: self.bridge.approach_elements,
                element_length: l0 / n0 as f64,
            })
        } else {
            None
        };
        let mut bridge = BridgeModel::assemble(
            &self.bridge.spans,
            self.bridge.e_modulus * self.bridge.inertia,
            self.bridge.mass_per_length,
            match self.bridge.bc {
                BcConfig::Fixed => BcKind::FixedEnds,
                BcConfig::SimplySupported => BcKind::SimplySupported,
            },
            approach,
        )?;
        if self.bridge.damping_ratio > 0.0 {
            bridge.set_rayleigh_damping(self.bridge.damping_ratio, (0, 1))?;
        }
        let specs = self.train.specs();
        let gaps_owned;
        let gaps = match &self.train.gaps {
            Some(g) if !g.is_empty() => {
                gaps_owned = repeat_gaps(g, specs.len());
                Some(gaps_owned.as_slice())
            }
            _ => None,
        };
        let train = TrainModel::build_train(
            &specs,
            gaps,
            self.train.shared_dofs.as_deref(),
        )?;
        let profile: Option<Arc<dyn TrackIrregularity>> = match &self.irregularity {
            None => None,
            Some(cfg) => {
                let span_end = bridge.span_extent.1;
                Some(Arc::new(IrregularityProfile::generate(
                    cfg.seed,
                    &cfg.psd_params(),
                    cfg.tolerance,
                    0.0,
                    span_end,
                )?))
            }
        };
        let wheel_span = *train.wheel_offsets.last().unwrap_or(&0.0);
        let start = self.run.start_position.unwrap_or(-wheel_span);
        let t_end = match self.run.t_end {
            Some(t) => t,
            None => {
                if self.run.speed <= 0.0 {
                    return Err(VtsiError::InvalidConfig(
                        "t_end must be given for a stationary train".into(),
                    ));
                }
                let travel = bridge.span_extent.1 - start + 5.0;
                travel / self.run.speed
            }
        };
        let probes = if self.probes.is_empty() {
            let mut p = vec![Probe::BridgeDeflection {
                x: self.bridge.spans[0].0 / 2.0,
            }];
            p.extend((0..train.n_wheels()).map(|index| Probe::Wheel { index }));
            p
        } else {
            self.probes
                .iter()
                .map(|s| Probe::parse(s))
                .collect::<Result<Vec<_>>>()?
        };
        Ok(BuiltScenario {
            bridge,
            train,
            profile,
            start,
            t_end,
            probes,
        })
    }

    /// Runs the configured scheme to completion.
    pub fn run(&self) -> Result<SimulationTrace> {
        let built = self.build()?;
        let interp = match self.run.constraint_interp {
            InterpConfig::Hermite => ConstraintInterp::Hermite,
            InterpConfig::Bspline => ConstraintInterp::BSpline,
        };
        let mut moving = MovingWheels::new(
            &built.bridge,
            &built.train,
            built.start,
            self.run.speed,
            built.profile.clone(),
            interp,
        )?;
        if self.run.track_datum == TrackDatum::UnloadedGeometry {
            let sag = built
                .bridge
                .system
                .k
                .clone()
                .lu()
                .solve(&built.bridge.system.p)
                .ok_or_else(|| {
                    VtsiError::SingularStatics("bridge stiffness is singular".into())
                })?;
            moving = moving.with_unloaded_datum(sag);
        }
        let args = SimArgs {
            train: &built.train,
            bridge: &built.bridge,
            path: &moving,
            dt: self.run.dt,
            t_end: built.t_end,
            probes: built.probes.clone(),
            config_hash: self.hash(),
        };
        match self.run.scheme {
            Scheme::Bauchau => bauchau::run(&args),
            Scheme::Bathe => bathe::run(
                &args,
                match self.run.contact {
                    ContactConfig::Bilateral => ContactMode::Bilateral,
                    ContactConfig::Lcp => ContactMode::Lcp,
                },
            ),
            Scheme::OracleBdf1 => reference::run_bdf(&args, BdfOrder::One),
            Scheme::OracleBdf2 => reference::run_bdf(&args, BdfOrder::Two),
            Scheme::OracleDirect => reference::run_direct(&args, &moving),
        }
    }

    /// Runs two schemes on this scenario and reports per-probe relative
    /// L∞ deltas (displacement series), plus per-wheel contact deltas.
    pub fn compare(&self, a: Scheme, b: Scheme) -> Result<Vec<(String, f64)>> {
        let mut cfg_a = self.clone();
        cfg_a.run.scheme = a;
        let mut cfg_b = self.clone();
        cfg_b.run.scheme = b;
        let ta = cfg_a.run()?;
        let tb = cfg_b.run()?;
        let mut out = Vec::new();
        for (pa, pb) in ta.probes.iter().zip(&tb.probes) {
            out.push((pa.label.clone(), relative_linf(&pa.u, &pb.u)));
        }
        for w in 0..ta.n_wheels() {
            // Multiplier instants may differ by half a step between
            // schemes; interpolate onto a common grid.
            let la = crate::metrics::resample_shifted(
                &ta.lambda_series(w),
                ta.dt,
                -ta.lambda_time_shift,
            );
            let lb = crate::metrics::resample_shifted(
                &tb.lambda_series(w),
                tb.dt,
                -tb.lambda_time_shift,
            );
            out.push((format!("lambda_{}", w + 1), relative_linf(&la, &lb)));
        }
        Ok(out)
    }
}

fn repeat_gaps(gaps: &[f64], n_cars: usize) -> Vec<f64> {
    if n_cars <= 1 {
        return Vec::new();
    }
    (0..n_cars - 1).map(|i| gaps[i % gaps.len()]).collect()
}

/// One row of a speed sweep: response maxima at the configured probes.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub speed: f64,
    pub max_displacement: f64,
    pub max_acceleration: f64,
}

/// Sweeps train speed; runs execute in a parallel worker pool and errors
/// are kept per speed so partial results survive.
pub fn sweep_speed(
    config: &ScenarioConfig,
    speeds: &[f64],
) -> Vec<(f64, Result<SweepPoint>)> {
    speeds
        .par_iter()
        .map(|&v| {
            let mut cfg = config.clone();
            cfg.run.speed = v;
            cfg.run.t_end = None; // full crossing at each speed
            let point = cfg.run().map(|trace| {
                let probe = &trace.probes[0];
                SweepPoint {
                    speed: v,
                    max_displacement: probe.u.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
                    max_acceleration: probe.a.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
                }
            });
            (v, point)
        })
        .collect()
}

/// Resonance estimate: bridge frequency times car length.
pub fn resonant_speed_prediction(bridge_f1_hz: f64, car_length: f64) -> f64 {
    bridge_f1_hz * car_length
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub label: String,
    pub max_contact_force: f64,
    pub max_midspan_displacement: f64,
    pub max_first_wheel_displacement: f64,
}

/// Reruns the scenario over mesh refinements (`elements per span`) and
/// time-step refinements, tracking the three response maxima.
pub fn convergence_study(
    config: &ScenarioConfig,
    n_elements: &[usize],
    time_steps: &[f64],
) -> Result<Vec<ConvergenceRow>> {
    let mut variants: Vec<(String, ScenarioConfig)> = Vec::new();
    for &n in n_elements {
        let mut cfg = config.clone();
        for span in cfg.bridge.spans.iter_mut() {
            span.1 = n;
        }
        variants.push((format!("N={n}"), cfg));
    }
    for &dt in time_steps {
        let mut cfg = config.clone();
        cfg.run.dt = dt;
        variants.push((format!("dt={dt}"), cfg));
    }
    let mid = config.bridge.spans[0].0 / 2.0;
    variants
        .par_iter()
        .map(|(label, cfg)| {
            let mut cfg = cfg.clone();
            let mid_label = format!("bridge:{mid}");
            cfg.probes = vec![mid_label.clone(), "wheel:0".into()];
            let trace = cfg.run()?;
            let max_abs = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            let max_lambda = trace
                .lambda
                .iter()
                .flat_map(|l| l.iter())
                .fold(0.0_f64, |m, x| m.max(x.abs()));
            Ok(ConvergenceRow {
                label: label.clone(),
                max_contact_force: max_lambda,
                max_midspan_displacement: max_abs(&trace.probe(&mid_label).unwrap().u),
                max_first_wheel_displacement: max_abs(&trace.probe("wheel:0").unwrap().u),
            })
        })
        .collect()
}

/// Built-in analysis cases.
pub mod cases {
    use super::*;

    pub const NAMES: [&str; 6] = ["case1", "case2", "case3", "case4", "case5", "case6"];

    pub fn describe(name: &str) -> &'static str {
        match name {
            "case1" => "two fixed 30 m spans, one car, massless wheels",
            "case2" => "two fixed 30 m spans, one car, 1000 kg wheels",
            "case3" => "two simply supported 30 m spans, one car, massless wheels",
            "case4" => "two simply supported 30 m spans, one car, 1000 kg wheels",
            "case5" => "single simply supported 30 m span, ten cars, speed sweep",
            "case6" => "two fixed 25 m spans, two heavy cars, contact separation",
            _ => "",
        }
    }

    fn benchmark_car(wheel_mass: f64) -> CarConfig {
        CarConfig {
            carriage_mass: 60_000.0,
            pitch_inertia: 1.125e6,
            wheel_mass,
            suspension_stiffness: 5e6,
            suspension_damping: Some(27e3),
            axle_spacing: 15.0,
            car_length: 20.0,
        }
    }

    fn two_span_bridge(bc: BcConfig, approach: usize) -> BridgeConfig {
        BridgeConfig {
            spans: vec![(30.0, 100), (30.0, 100)],
            e_modulus: 29e9,
            inertia: 8.65,
            mass_per_length: 36_000.0,
            bc,
            approach_elements: approach,
            damping_ratio: 0.05,
        }
    }

    fn one_car_case(bc: BcConfig, approach: usize, wheel_mass: f64) -> ScenarioConfig {
        ScenarioConfig {
            probes: vec!["bridge:15".into(), "wheel:0".into(), "wheel:1".into()],
            bridge: two_span_bridge(bc, approach),
            train: TrainConfig {
                gaps: None,
                shared_dofs: None,
                count: 1,
                cars: vec![benchmark_car(wheel_mass)],
            },
            run: RunConfig {
                speed: 110.0,
                start_position: Some(-15.0),
                dt: 1e-3,
                t_end: Some(0.9),
                scheme: Scheme::Bauchau,
                constraint_interp: InterpConfig::Hermite,
                contact: ContactConfig::Bilateral,
                track_datum: TrackDatum::UnloadedGeometry,
            },
            irregularity: None,
        }
    }

    pub fn get(name: &str) -> Result<ScenarioConfig> {
        match name {
            "case1" => Ok(one_car_case(BcConfig::Fixed, 4, 0.0)),
            "case2" => Ok(one_car_case(BcConfig::Fixed, 4, 1000.0)),
            "case3" => Ok(one_car_case(BcConfig::SimplySupported, 0, 0.0)),
            "case4" => Ok(one_car_case(BcConfig::SimplySupported, 0, 1000.0)),
            "case5" => Ok(ScenarioConfig {
                probes: vec!["bridge:15".into()],
                bridge: BridgeConfig {
                    spans: vec![(30.0, 50)],
                    e_modulus: 29e9,
                    inertia: 8.65,
                    mass_per_length: 36_000.0,
                    bc: BcConfig::SimplySupported,
                    approach_elements: 0,
                    damping_ratio: 0.05,
                },
                train: TrainConfig {
                    gaps: None,
                    shared_dofs: None,
                    count: 10,
                    cars: vec![benchmark_car(1000.0)],
                },
                run: RunConfig {
                    speed: 94.0,
                    start_position: None,
                    dt: 2e-3,
                    t_end: None,
                    scheme: Scheme::Bathe,
                    constraint_interp: InterpConfig::Hermite,
                    contact: ContactConfig::Bilateral,
                    track_datum: TrackDatum::UnloadedGeometry,
                },
                irregularity: None,
            }),
            "case6" => Ok(ScenarioConfig {
                probes: vec![
                    "bridge:12.5".into(),
                    "wheel:0".into(),
                    "wheel:1".into(),
                    "wheel:2".into(),
                    "wheel:3".into(),
                ],
                bridge: BridgeConfig {
                    spans: vec![(25.0, 50), (25.0, 50)],
                    e_modulus: 22e9,
                    inertia: 4.0,
                    mass_per_length: 38_000.0,
                    bc: BcConfig::Fixed,
                    approach_elements: 4,
                    damping_ratio: 0.05,
                },
                train: TrainConfig {
                    gaps: Some(vec![3.0]),
                    shared_dofs: None,
                    count: 2,
                    cars: vec![CarConfig {
                        carriage_mass: 100_000.0,
                        pitch_inertia: 506_670.0,
                        wheel_mass: 1000.0,
                        suspension_stiffness: 5e7,
                        suspension_damping: None, // 5% of critical
                        axle_spacing: 6.0,
                        car_length: 9.0,
                    }],
                },
                run: RunConfig {
                    speed: 110.0,
                    start_position: Some(-15.0),
                    dt: 1e-3,
                    t_end: Some(0.8),
                    scheme: Scheme::Bathe,
                    constraint_interp: InterpConfig::Hermite,
                    contact: ContactConfig::Lcp,
                    track_datum: TrackDatum::UnloadedGeometry,
                },
                irregularity: None,
            }),
            _ => Err(VtsiError::InvalidConfig(format!(
                "unknown case `{name}`; available: {}",
                NAMES.join(", ")
            ))),
        }
    }
}

/// Writes a sweep summary as CSV: `speed,max_displacement,max_acceleration`.
pub fn write_sweep_csv<W: std::io::Write>(
    out: &mut W,
    rows: &[(f64, Result<SweepPoint>)],
) -> Result<()> {
    writeln!(out, "speed,max_displacement,max_acceleration")?;
    for (v, row) in rows {
        match row {
            Ok(p) => writeln!(
                out,
                "{:.14e},{:.14e},{:.14e}",
                v, p.max_displacement, p.max_acceleration
            )?,
            Err(e) => writeln!(out, "{v:.14e},error,{e}")?,
        }
    }
    Ok(())
}

/// Writes a convergence table as CSV.
pub fn write_convergence_csv<W: std::io::Write>(
    out: &mut W,
    rows: &[ConvergenceRow],
) -> Result<()> {
    writeln!(
        out,
        "level,max_contact_force,max_midspan_displacement,max_first_wheel_displacement"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{:.14e},{:.14e},{:.14e}",
            r.label,
            r.max_contact_force,
            r.max_midspan_displacement,
            r.max_first_wheel_displacement
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        for name in cases::NAMES {
            let cfg = cases::get(name).unwrap();
            let text = cfg.to_toml();
            let back = ScenarioConfig::from_toml(&text).unwrap();
            assert_eq!(cfg, back, "{name} did not round-trip");
            assert_eq!(cfg.hash(), back.hash());
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = cases::get("case1").unwrap().to_toml();
        text.push_str("\n[extra]\nkey = 1\n");
        assert!(ScenarioConfig::from_toml(&text).is_err());
        let bad = text.replace("[bridge]", "[bridge]\nbogus_key = 3\n");
        assert!(ScenarioConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn case_catalog_builds() {
        for name in cases::NAMES {
            let cfg = cases::get(name).unwrap();
            let built = cfg.build().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(built.t_end > 0.0);
            assert!(!cases::describe(name).is_empty());
        }
        assert!(cases::get("case99").is_err());
    }

    #[test]
    fn case6_geometry() {
        let built = cases::get("case6").unwrap().build().unwrap();
        assert_eq!(built.train.wheel_offsets, vec![0.0, 6.0, 9.0, 15.0]);
        assert_eq!(built.train.n_dof(), 8);
        // Lead wheel at the bridge start at t = 0; the rear wheel leaves
        // the 50 m deck at (50 + 15)/110 s.
        assert_eq!(built.start, -15.0);
        // Five-percent-of-critical suspension damping.
        let cs = built.train.system.c[(built.train.wheel_dofs[0], built.train.wheel_dofs[0])];
        let expected = 0.05 * (5e7_f64 * 1e5).sqrt();
        approx::assert_relative_eq!(cs, expected, max_relative = 1e-12);
    }

    #[test]
    fn incompatible_options_rejected() {
        let mut cfg = cases::get("case3").unwrap();
        cfg.run.constraint_interp = InterpConfig::Bspline;
        assert!(cfg.build().is_err());

        let mut cfg = cases::get("case2").unwrap();
        cfg.run.contact = ContactConfig::Lcp; // scheme is bauchau
        assert!(cfg.build().is_err());

        let mut cfg = cases::get("case1").unwrap();
        cfg.run.scheme = Scheme::OracleDirect;
        cfg.run.constraint_interp = InterpConfig::Bspline;
        assert!(cfg.build().is_err());
    }

    #[test]
    fn resonance_prediction_formula() {
        approx::assert_relative_eq!(resonant_speed_prediction(4.6, 20.0), 92.0);
    }

    #[test]
    fn single_speed_sweep_equals_run() {
        let mut cfg = cases::get("case5").unwrap();
        cfg.bridge.spans = vec![(30.0, 10)];
        cfg.train.count = 1;
        cfg.run.dt = 5e-3;
        let rows = sweep_speed(&cfg, &[80.0]);
        assert_eq!(rows.len(), 1);
        let point = rows[0].1.as_ref().unwrap();
        let mut direct = cfg.clone();
        direct.run.speed = 80.0;
        direct.run.t_end = None;
        let trace = direct.run().unwrap();
        let max_u = trace.probes[0].u.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        approx::assert_relative_eq!(point.max_displacement, max_u);
    }
}
