//! Bridge finite-element model: prismatic Euler-Bernoulli beam elements,
//! consistent mass, boundary conditions by elimination, Rayleigh damping and
//! the per-element influence (Hermite) rows used to couple moving wheels to
//! the deck.
//!
//! ## Conventions
//!
//! - Bridge deflections `w` are positive **upward**; rotations `θ = dw/dx`.
//! - Per node the DOF order is `(w, θ)`, nodes numbered left to right.
//! - Gravity dead load is therefore a negative nodal load.
//! - Constrained DOFs are eliminated (rows/columns deleted), which keeps the
//!   reduced mass matrix positive definite for factorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VtsiError};
use crate::linalg::generalized_symmetric_eigenvalues;
use crate::system::SecondOrderSystem;

pub const GRAVITY: f64 = 9.81;

/// Support layout for the span ends. Interior span joints are always pinned
/// (deflection fixed, rotation free).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    /// Both bridge ends clamped: deflection and rotation fixed.
    FixedEnds,
    /// Both bridge ends pinned: deflection fixed, rotation free.
    SimplySupported,
}

/// Extra fully-fixed track segments modeled beyond each bridge end. They add
/// no free DOFs; their nodes act as clamped control points for the spline
/// constraint interpolation.
#[derive(Debug, Clone, Copy)]
pub struct Approach {
    /// Number of elements per side.
    pub n_elements: usize,
    /// Length of each approach element (m).
    pub element_length: f64,
}

/// A prismatic Euler-Bernoulli beam element.
#[derive(Debug, Clone)]
pub struct BeamElement {
    /// Element length (m).
    pub length: f64,
    /// Flexural rigidity EI (N·m²).
    pub ei: f64,
    /// Mass per unit length (kg/m).
    pub mass_per_length: f64,
    /// Left/right node indices.
    pub node_ids: (usize, usize),
}

/// Element influence row of Hermite shape functions: nodal values
/// `[w₁, θ₁, w₂, θ₂]` weights for a unit point load a distance `a` from the
/// left node of an element of length `l` (and `b = l − a` from the right).
///
/// Dotted with the member-end displacements this gives the deflection at
/// `a`; transposed it spreads a wheel force into equivalent (fixed-end)
/// nodal forces.
pub fn element_influence(a: f64, l: f64) -> Result<[f64; 4]> {
    if !(0.0..=l).contains(&a) || l <= 0.0 {
        return Err(VtsiError::InvalidModel(format!(
            "influence location a = {a} outside element [0, {l}]"
        )));
    }
    let b = l - a;
    Ok([
        b * b * (b + 3.0 * a) / (l * l * l),
        a * b * b / (l * l),
        a * a * (a + 3.0 * b) / (l * l * l),
        -a * a * b / (l * l),
    ])
}

/// First derivative of [`element_influence`] with respect to `a`.
pub fn element_influence_d1(a: f64, l: f64) -> [f64; 4] {
    let b = l - a;
    let l2 = l * l;
    let l3 = l2 * l;
    [
        -6.0 * a * b / l3,
        1.0 - 4.0 * a / l + 3.0 * a * a / l2,
        6.0 * a * b / l3,
        -2.0 * a / l + 3.0 * a * a / l2,
    ]
}

/// Second derivative of [`element_influence`] with respect to `a`. Constant
/// plus linear in `a`; generally discontinuous across element joints, which
/// is what injects spurious high-frequency content into the contact forces.
pub fn element_influence_d2(a: f64, l: f64) -> [f64; 4] {
    let l2 = l * l;
    let l3 = l2 * l;
    [
        6.0 * (2.0 * a - l) / l3,
        (-4.0 * l + 6.0 * a) / l2,
        6.0 * (l - 2.0 * a) / l3,
        (-2.0 * l + 6.0 * a) / l2,
    ]
}

/// 4x4 element stiffness for bending about the transverse axis.
fn element_stiffness(ei: f64, l: f64) -> DMatrix<f64> {
    let l2 = l * l;
    let c = ei / (l2 * l);
    DMatrix::from_row_slice(
        4,
        4,
        &[
            12.0 * c,
            6.0 * l * c,
            -12.0 * c,
            6.0 * l * c,
            6.0 * l * c,
            4.0 * l2 * c,
            -6.0 * l * c,
            2.0 * l2 * c,
            -12.0 * c,
            -6.0 * l * c,
            12.0 * c,
            -6.0 * l * c,
            6.0 * l * c,
            2.0 * l2 * c,
            -6.0 * l * c,
            4.0 * l2 * c,
        ],
    )
}

/// 4x4 consistent (cubic-Hermite) element mass matrix.
fn element_mass(mu: f64, l: f64) -> DMatrix<f64> {
    let l2 = l * l;
    let c = mu * l / 420.0;
    DMatrix::from_row_slice(
        4,
        4,
        &[
            156.0 * c,
            22.0 * l * c,
            54.0 * c,
            -13.0 * l * c,
            22.0 * l * c,
            4.0 * l2 * c,
            13.0 * l * c,
            -3.0 * l2 * c,
            54.0 * c,
            13.0 * l * c,
            156.0 * c,
            -22.0 * l * c,
            -13.0 * l * c,
            -3.0 * l2 * c,
            -22.0 * l * c,
            4.0 * l2 * c,
        ],
    )
}

/// Consistent nodal load vector for a uniform distributed load `q` (N/m).
fn element_uniform_load(q: f64, l: f64) -> [f64; 4] {
    [
        q * l / 2.0,
        q * l * l / 12.0,
        q * l / 2.0,
        -q * l * l / 12.0,
    ]
}

/// Assembled bridge model, immutable after construction.
#[derive(Debug, Clone)]
pub struct BridgeModel {
    /// All elements left to right, approach segments included.
    pub elements: Vec<BeamElement>,
    /// Node longitudinal coordinates (m), strictly increasing.
    pub node_x: Vec<f64>,
    /// Per-DOF constrained flag over the full `(w, θ)` per-node layout.
    pub bc: Vec<bool>,
    /// Full DOF index → free (reduced) index.
    dof_map: Vec<Option<usize>>,
    /// Reduced system over the free DOFs; `P` holds the self-weight dead
    /// load (negative, deflection positive upward).
    pub system: SecondOrderSystem,
    /// Load-carrying region `[x_start, x_end]` (m); wheels outside it ride
    /// rigid ground.
    pub span_extent: (f64, f64),
    /// Index range of span (non-approach) elements within `elements`.
    span_elems: (usize, usize),
    /// End-support layout the model was assembled with.
    pub bc_kind: BcKind,
}

/// Result of locating a wheel along the bridge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    /// Host element index and local coordinate `a` from its left node.
    OnSpan { element: usize, a: f64 },
    OffSpan,
}

impl BridgeModel {
    /// Assembles a multi-span bridge of prismatic beam elements.
    ///
    /// `spans` lists `(length, n_elements)` per span, left to right. All
    /// spans share the section properties `ei` (N·m²) and `mu` (kg/m). The
    /// ends are supported per `bc`; interior span joints are pinned.
    /// Optional `approach` segments extend fully-fixed track beyond both
    /// ends.
    pub fn assemble(
        spans: &[(f64, usize)],
        ei: f64,
        mu: f64,
        bc_kind: BcKind,
        approach: Option<Approach>,
    ) -> Result<Self> {
        if spans.is_empty() {
            return Err(VtsiError::InvalidModel("bridge needs at least one span".into()));
        }
        if ei <= 0.0 {
            return Err(VtsiError::InvalidModel("EI must be positive".into()));
        }
        if mu < 0.0 {
            return Err(VtsiError::InvalidModel("mass per length must be non-negative".into()));
        }
        for &(l, n) in spans {
            if l <= 0.0 {
                return Err(VtsiError::InvalidModel(format!("span length {l} must be positive")));
            }
            if n == 0 {
                return Err(VtsiError::InvalidModel("each span needs at least one element".into()));
            }
            if l / n as f64 <= 0.0 {
                return Err(VtsiError::InvalidModel("zero-length element".into()));
            }
        }
        let n_app = approach.map_or(0, |a| a.n_elements);
        if let Some(a) = approach {
            if a.n_elements > 0 && a.element_length <= 0.0 {
                return Err(VtsiError::InvalidModel("zero-length approach element".into()));
            }
        }

        // Node coordinates: left approach, spans, right approach.
        let total_span: f64 = spans.iter().map(|s| s.0).sum();
        let mut node_x = Vec::new();
        if let Some(a) = approach {
            for i in 0..a.n_elements {
                node_x.push(-(a.n_elements as f64 - i as f64) * a.element_length);
            }
        }
        let mut span_joint_nodes = Vec::new(); // node indices of span boundaries
        let mut x = 0.0;
        span_joint_nodes.push(node_x.len());
        node_x.push(0.0);
        for &(l, n) in spans {
            let h = l / n as f64;
            for i in 1..=n {
                node_x.push(x + h * i as f64);
            }
            x += l;
            span_joint_nodes.push(node_x.len() - 1);
        }
        if let Some(a) = approach {
            for i in 1..=a.n_elements {
                node_x.push(total_span + i as f64 * a.element_length);
            }
        }
        let n_nodes = node_x.len();

        // Elements chain consecutive nodes.
        let mut elements = Vec::with_capacity(n_nodes - 1);
        for i in 0..n_nodes - 1 {
            let length = node_x[i + 1] - node_x[i];
            elements.push(BeamElement {
                length,
                ei,
                mass_per_length: mu,
                node_ids: (i, i + 1),
            });
        }
        let span_elems = (n_app, elements.len() - n_app);

        // Boundary-condition mask over (w, θ) per node.
        let mut bc = vec![false; 2 * n_nodes];
        for i in 0..n_app {
            // Left approach nodes fully fixed.
            bc[2 * i] = true;
            bc[2 * i + 1] = true;
            // Right approach nodes fully fixed.
            let j = n_nodes - 1 - i;
            bc[2 * j] = true;
            bc[2 * j + 1] = true;
        }
        for (si, &node) in span_joint_nodes.iter().enumerate() {
            let is_end = si == 0 || si == span_joint_nodes.len() - 1;
            bc[2 * node] = true; // deflection fixed at every support
            if is_end && bc_kind == BcKind::FixedEnds {
                bc[2 * node + 1] = true; // clamp rotation at the ends
            }
        }

        let dof_map = build_dof_map(&bc);
        let n_free = dof_map.iter().filter(|d| d.is_some()).count();
        if n_free == 0 {
            return Err(VtsiError::InvalidModel("all DOFs constrained".into()));
        }

        // Assemble full matrices, then reduce.
        let n_full = 2 * n_nodes;
        let mut m_full = DMatrix::<f64>::zeros(n_full, n_full);
        let mut k_full = DMatrix::<f64>::zeros(n_full, n_full);
        let mut p_full = DVector::<f64>::zeros(n_full);
        for e in &elements {
            let ke = element_stiffness(e.ei, e.length);
            let me = element_mass(e.mass_per_length, e.length);
            let fe = element_uniform_load(-e.mass_per_length * GRAVITY, e.length);
            let dofs = [
                2 * e.node_ids.0,
                2 * e.node_ids.0 + 1,
                2 * e.node_ids.1,
                2 * e.node_ids.1 + 1,
            ];
            for (i, &gi) in dofs.iter().enumerate() {
                p_full[gi] += fe[i];
                for (j, &gj) in dofs.iter().enumerate() {
                    m_full[(gi, gj)] += me[(i, j)];
                    k_full[(gi, gj)] += ke[(i, j)];
                }
            }
        }
        let m = reduce_matrix(&m_full, &dof_map, n_free);
        let k = reduce_matrix(&k_full, &dof_map, n_free);
        let p = reduce_vector(&p_full, &dof_map, n_free);
        let c = DMatrix::zeros(n_free, n_free);
        let system = SecondOrderSystem::new(m, c, k, p)?;

        Ok(Self {
            elements,
            node_x,
            bc,
            dof_map,
            system,
            span_extent: (0.0, total_span),
            span_elems,
            bc_kind,
        })
    }

    /// Number of free DOFs.
    pub fn n_free(&self) -> usize {
        self.system.n_dof
    }

    /// Free index of a full DOF, `None` if constrained.
    pub fn free_index(&self, full_dof: usize) -> Option<usize> {
        self.dof_map[full_dof]
    }

    /// Free index of the deflection DOF at the node nearest to `x`.
    pub fn deflection_dof_near(&self, x: f64) -> Result<usize> {
        let (node, _) = self
            .node_x
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - x).abs().partial_cmp(&(b.1 - x).abs()).unwrap()
            })
            .unwrap();
        self.dof_map[2 * node].ok_or_else(|| {
            VtsiError::InvalidConfig(format!(
                "deflection at x = {x} m (node {node}) is constrained"
            ))
        })
    }

    /// Natural frequencies in Hz, ascending, from `K φ = ω² M φ`.
    pub fn natural_frequencies(&self, count: usize) -> Result<Vec<f64>> {
        if count > self.n_free() {
            return Err(VtsiError::InvalidConfig(format!(
                "requested {count} frequencies from a {}-DOF model",
                self.n_free()
            )));
        }
        let vals = generalized_symmetric_eigenvalues(&self.system.k, &self.system.m)?;
        Ok(vals
            .into_iter()
            .take(count)
            .map(|w2| w2.max(0.0).sqrt() / (2.0 * std::f64::consts::PI))
            .collect())
    }

    /// Installs Rayleigh damping `C = αM + βK` calibrated so the modal
    /// damping ratio equals `xi` in the two modes of `mode_pair`
    /// (zero-based indices into the ascending frequency list).
    pub fn set_rayleigh_damping(&mut self, xi: f64, mode_pair: (usize, usize)) -> Result<()> {
        let (i, j) = mode_pair;
        let freqs = self.natural_frequencies(i.max(j) + 1)?;
        let (wi, wj) = (
            2.0 * std::f64::consts::PI * freqs[i],
            2.0 * std::f64::consts::PI * freqs[j],
        );
        if (wi - wj).abs() <= 1e-9 * wi.max(wj) {
            return Err(VtsiError::InvalidConfig(format!(
                "repeated modal frequencies {wi:.6} / {wj:.6} rad/s cannot calibrate Rayleigh damping"
            )));
        }
        let alpha = 2.0 * xi * wi * wj / (wi + wj);
        let beta = 2.0 * xi / (wi + wj);
        self.system.c = &self.system.m * alpha + &self.system.k * beta;
        Ok(())
    }

    /// Finds the host element of a wheel at position `x`.
    ///
    /// A wheel exactly on an interior joint belongs to the **left** element
    /// (local coordinate `a = l`); this fixed tie-break keeps runs
    /// reproducible. Outside the load-carrying extent the wheel is off
    /// span.
    pub fn locate(&self, x: f64) -> Location {
        let (x0, x1) = self.span_extent;
        if x < x0 || x > x1 {
            return Location::OffSpan;
        }
        if x == x0 {
            return Location::OnSpan {
                element: self.span_elems.0,
                a: 0.0,
            };
        }
        for e in self.span_elems.0..self.span_elems.1 {
            let left = self.node_x[self.elements[e].node_ids.0];
            let right = self.node_x[self.elements[e].node_ids.1];
            if x > left && x <= right {
                return Location::OnSpan {
                    element: e,
                    a: x - left,
                };
            }
        }
        Location::OffSpan
    }

    /// Scatters an element influence row into a global free-DOF row.
    /// Entries on constrained DOFs are dropped.
    pub fn scatter_element_row(&self, element: usize, row: [f64; 4], out: &mut DVector<f64>) {
        let e = &self.elements[element];
        let dofs = [
            2 * e.node_ids.0,
            2 * e.node_ids.0 + 1,
            2 * e.node_ids.1,
            2 * e.node_ids.1 + 1,
        ];
        for (v, &full) in row.iter().zip(&dofs) {
            if let Some(free) = self.dof_map[full] {
                out[free] += v;
            }
        }
    }
}

fn build_dof_map(bc: &[bool]) -> Vec<Option<usize>> {
    let mut map = Vec::with_capacity(bc.len());
    let mut next = 0;
    for &constrained in bc {
        if constrained {
            map.push(None);
        } else {
            map.push(Some(next));
            next += 1;
        }
    }
    map
}

fn reduce_matrix(full: &DMatrix<f64>, map: &[Option<usize>], n_free: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n_free, n_free);
    for (i, &mi) in map.iter().enumerate() {
        let Some(ri) = mi else { continue };
        for (j, &mj) in map.iter().enumerate() {
            if let Some(rj) = mj {
                out[(ri, rj)] = full[(i, j)];
            }
        }
    }
    out
}

fn reduce_vector(full: &DVector<f64>, map: &[Option<usize>], n_free: usize) -> DVector<f64> {
    let mut out = DVector::zeros(n_free);
    for (i, &mi) in map.iter().enumerate() {
        if let Some(ri) = mi {
            out[ri] = full[i];
        }
    }
    out
}
