//! Two-dimensional vehicle-track-structure interaction analysis.
//!
//! A train (multibody, matrices importable from external tools) and a
//! bridge (Euler-Bernoulli finite elements) are modeled as independent
//! linear systems and coupled through time-varying kinematic constraints
//! with Lagrange multipliers, forming an index-3 DAE. Two production
//! integrators are provided — a self-stabilized mid-step scheme and the
//! Bathe composite scheme — plus a complementarity formulation for
//! wheel separation, a B-spline constraint interpolation that removes
//! curvature jumps from the influence rows, synthetic track
//! irregularities from a PSD model, and two independent reference
//! solvers for cross-validation.

pub mod bathe;
pub mod bauchau;
pub mod bridge;
pub mod bspline;
pub mod coupling;
pub mod error;
pub mod irregularity;
pub mod lcp;
pub mod linalg;
pub mod metrics;
pub mod reference;
pub mod scenario;
pub mod statics;
pub mod system;
pub mod trace;
pub mod train;

pub use bridge::{BcKind, BridgeModel};
pub use error::{Result, VtsiError};
pub use scenario::ScenarioConfig;
pub use trace::{Probe, SimulationTrace};
pub use train::{CarSpec, TrainModel};
