//! Multibody train models: the 4-DOF rigid-bar car (carriage heave and
//! pitch plus two wheel heaves), generic multi-car block assembly with
//! optional shared-DOF articulation, and import of externally generated
//! train matrices.
//!
//! ## Conventions
//!
//! - Train displacements are positive **downward** (bridge deflections are
//!   positive upward; the kinematic constraint couples the two through the
//!   influence rows so that `L^t u^t + L^b u^b = −ρ` holds literally).
//! - The wheel influence matrix `L^t` selects each wheel's heave DOF with
//!   coefficient +1, so the contact force λ (positive in compression)
//!   enters the wheel equations as `+λ`.
//! - Gravity loads are positive; they are applied in a static pre-analysis,
//!   never inside the dynamic increments.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::bridge::GRAVITY;
use crate::error::{Result, VtsiError};
use crate::linalg::solve_kkt;
use crate::system::SecondOrderSystem;

/// Parameters of one two-axle car.
#[derive(Debug, Clone, Copy)]
pub struct CarSpec {
    /// Carriage mass (kg).
    pub carriage_mass: f64,
    /// Carriage pitch inertia (kg·m²).
    pub pitch_inertia: f64,
    /// Mass of each wheel (kg); zero is allowed.
    pub wheel_mass: f64,
    /// Stiffness of each suspension (N/m).
    pub suspension_stiffness: f64,
    /// Damping of each suspension (N·s/m).
    pub suspension_damping: f64,
    /// Wheel-to-wheel distance (m).
    pub axle_spacing: f64,
    /// Total car length (m); sets the default inter-car wheel gap.
    pub car_length: f64,
}

impl CarSpec {
    fn validate(&self) -> Result<()> {
        if self.carriage_mass < 0.0 || self.pitch_inertia < 0.0 || self.wheel_mass < 0.0 {
            return Err(VtsiError::InvalidModel("car masses must be non-negative".into()));
        }
        if self.suspension_stiffness <= 0.0 {
            return Err(VtsiError::InvalidModel("suspension stiffness must be positive".into()));
        }
        if self.suspension_damping < 0.0 {
            return Err(VtsiError::InvalidModel("suspension damping must be non-negative".into()));
        }
        if self.axle_spacing <= 0.0 {
            return Err(VtsiError::InvalidModel("axle spacing must be positive".into()));
        }
        if self.car_length < self.axle_spacing {
            return Err(VtsiError::InvalidModel(
                "car length cannot be smaller than the axle spacing".into(),
            ));
        }
        Ok(())
    }
}

/// Index sets splitting the train DOFs into carriage and wheel blocks.
#[derive(Debug, Clone, Default)]
pub struct DofPartition {
    pub carriage: Vec<usize>,
    pub wheels: Vec<usize>,
}

/// Assembled train model, immutable after construction.
#[derive(Debug, Clone)]
pub struct TrainModel {
    /// Train matrices; `P` carries the gravity loads (positive downward).
    pub system: SecondOrderSystem,
    /// Wheel heave DOF indices, rear-most wheel first. Row `i` of the
    /// influence matrix `L^t` is the unit row selecting `wheel_dofs[i]`.
    pub wheel_dofs: Vec<usize>,
    /// Longitudinal wheel offsets (m) from the rear-most wheel, ascending.
    pub wheel_offsets: Vec<f64>,
    /// Carriage/wheel DOF split.
    pub partition: DofPartition,
    /// Total train length (m), bumper to bumper.
    pub total_length: f64,
}

/// Four-block partition of the train matrices per the carriage/wheel split.
#[derive(Debug, Clone)]
pub struct PartitionedTrain {
    pub m_cc: DMatrix<f64>,
    pub m_ww: DMatrix<f64>,
    pub c_cc: DMatrix<f64>,
    pub c_cw: DMatrix<f64>,
    pub c_wc: DMatrix<f64>,
    pub c_ww: DMatrix<f64>,
    pub k_cc: DMatrix<f64>,
    pub k_cw: DMatrix<f64>,
    pub k_wc: DMatrix<f64>,
    pub k_ww: DMatrix<f64>,
    pub p_c: DVector<f64>,
    pub p_w: DVector<f64>,
}

impl TrainModel {
    /// Number of wheels.
    pub fn n_wheels(&self) -> usize {
        self.wheel_dofs.len()
    }

    /// Number of train DOFs.
    pub fn n_dof(&self) -> usize {
        self.system.n_dof
    }

    /// Dense wheel influence matrix `L^t` (n_wheels × n_dof).
    pub fn lt_dense(&self) -> DMatrix<f64> {
        let mut lt = DMatrix::zeros(self.n_wheels(), self.n_dof());
        for (i, &d) in self.wheel_dofs.iter().enumerate() {
            lt[(i, d)] = 1.0;
        }
        lt
    }

    /// `L^t u`: picks the wheel heave components out of a train vector.
    pub fn wheel_values(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n_wheels(), self.wheel_dofs.iter().map(|&d| u[d]))
    }

    /// `L^tᵀ λ`: scatters per-wheel forces onto the train DOFs.
    pub fn scatter_wheel_forces(&self, lambda: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_dof());
        for (i, &d) in self.wheel_dofs.iter().enumerate() {
            out[d] = lambda[i];
        }
        out
    }

    /// Splits the train matrices into carriage/wheel blocks.
    pub fn partitioned(&self) -> Result<PartitionedTrain> {
        let mut seen = vec![0u8; self.n_dof()];
        for &d in self.partition.carriage.iter().chain(&self.partition.wheels) {
            seen[d] += 1;
            if seen[d] > 1 {
                return Err(VtsiError::InvalidModel(format!(
                    "DOF {d} listed in both partitions"
                )));
            }
        }
        let pick = |mat: &DMatrix<f64>, rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |i, j| mat[(rows[i], cols[j])])
        };
        let pickv = |v: &DVector<f64>, rows: &[usize]| {
            DVector::from_iterator(rows.len(), rows.iter().map(|&r| v[r]))
        };
        let c = &self.partition.carriage;
        let w = &self.partition.wheels;
        let s = &self.system;
        Ok(PartitionedTrain {
            m_cc: pick(&s.m, c, c),
            m_ww: pick(&s.m, w, w),
            c_cc: pick(&s.c, c, c),
            c_cw: pick(&s.c, c, w),
            c_wc: pick(&s.c, w, c),
            c_ww: pick(&s.c, w, w),
            k_cc: pick(&s.k, c, c),
            k_cw: pick(&s.k, c, w),
            k_wc: pick(&s.k, w, c),
            k_ww: pick(&s.k, w, w),
            p_c: pickv(&s.p, c),
            p_w: pickv(&s.p, w),
        })
    }

    /// Static wheel loads with every wheel pinned to rigid ground: the
    /// weight distribution that travels with the train. Also returns the
    /// static train displacements (suspension compressions).
    pub fn static_wheel_loads(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        let lt = self.lt_dense();
        let (u, lambda) = solve_kkt(
            &self.system.k,
            &lt,
            &self.system.p,
            &DVector::zeros(self.n_wheels()),
        )?;
        Ok((lambda, u))
    }

    /// Builds the illustrative one-car model: DOFs
    /// `[u_c, θ_c, u_w(rear), u_w(front)]` with suspensions at `∓l_c/2`
    /// from the carriage center.
    pub fn build_car(spec: &CarSpec) -> Result<Self> {
        spec.validate()?;
        let (mc, ic, mw) = (spec.carriage_mass, spec.pitch_inertia, spec.wheel_mass);
        let (ks, cs, lc) = (
            spec.suspension_stiffness,
            spec.suspension_damping,
            spec.axle_spacing,
        );
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![mc, ic, mw, mw]));
        // Suspension positions relative to the carriage center: the pitch
        // lever arm enters the coupling rows with its sign.
        let xs = [-lc / 2.0, lc / 2.0];
        let mut k = DMatrix::zeros(4, 4);
        for (wheel, &x) in xs.iter().enumerate() {
            let wdof = 2 + wheel;
            k[(0, 0)] += ks;
            k[(0, 1)] += ks * x;
            k[(1, 0)] += ks * x;
            k[(1, 1)] += ks * x * x;
            k[(0, wdof)] -= ks;
            k[(wdof, 0)] -= ks;
            k[(1, wdof)] -= ks * x;
            k[(wdof, 1)] -= ks * x;
            k[(wdof, wdof)] += ks;
        }
        let c = &k * (cs / ks);
        let p = DVector::from_vec(vec![mc * GRAVITY, 0.0, mw * GRAVITY, mw * GRAVITY]);
        let system = SecondOrderSystem::new(m, c, k, p)?;
        Ok(Self {
            system,
            wheel_dofs: vec![2, 3],
            wheel_offsets: vec![0.0, lc],
            partition: DofPartition {
                carriage: vec![0, 1],
                wheels: vec![2, 3],
            },
            total_length: spec.car_length,
        })
    }

    /// Assembles a train of cars rear-to-front in block-diagonal form.
    ///
    /// `gaps[i]` is the distance between the front wheel of car `i` and the
    /// rear wheel of car `i + 1`; when omitted it defaults to
    /// `car_length − axle_spacing` (cars parked bumper to bumper with the
    /// axles centered). `shared_dofs` merges listed DOF pairs by summing
    /// their matrix rows/columns, modeling articulated couplings.
    pub fn build_train(
        cars: &[CarSpec],
        gaps: Option<&[f64]>,
        shared_dofs: Option<&[(usize, usize)]>,
    ) -> Result<Self> {
        if cars.is_empty() {
            return Err(VtsiError::InvalidModel("train needs at least one car".into()));
        }
        if let Some(g) = gaps {
            if g.len() != cars.len() - 1 {
                return Err(VtsiError::InvalidModel(format!(
                    "expected {} inter-car gaps, got {}",
                    cars.len() - 1,
                    g.len()
                )));
            }
        }
        let n = 4 * cars.len();
        let mut m = DMatrix::zeros(n, n);
        let mut c = DMatrix::zeros(n, n);
        let mut k = DMatrix::zeros(n, n);
        let mut p = DVector::zeros(n);
        let mut wheel_dofs = Vec::new();
        let mut wheel_offsets = Vec::new();
        let mut partition = DofPartition::default();
        let mut rear_axle = 0.0;
        let mut total_length = 0.0;
        for (i, spec) in cars.iter().enumerate() {
            let car = Self::build_car(spec)?;
            let o = 4 * i;
            m.view_mut((o, o), (4, 4)).copy_from(&car.system.m);
            c.view_mut((o, o), (4, 4)).copy_from(&car.system.c);
            k.view_mut((o, o), (4, 4)).copy_from(&car.system.k);
            p.rows_mut(o, 4).copy_from(&car.system.p);
            partition.carriage.extend([o, o + 1]);
            partition.wheels.extend([o + 2, o + 3]);
            wheel_dofs.extend([o + 2, o + 3]);
            wheel_offsets.extend([rear_axle, rear_axle + spec.axle_spacing]);
            total_length += spec.car_length;
            if i + 1 < cars.len() {
                let gap = gaps
                    .map(|g| g[i])
                    .unwrap_or(spec.car_length - spec.axle_spacing);
                if gap < 0.0 {
                    return Err(VtsiError::InvalidModel("negative inter-car gap".into()));
                }
                rear_axle += spec.axle_spacing + gap;
            }
        }
        let mut model = Self {
            system: SecondOrderSystem::new(m, c, k, p)?,
            wheel_dofs,
            wheel_offsets,
            partition,
            total_length,
        };
        if let Some(pairs) = shared_dofs {
            model = model.merge_dofs(pairs)?;
        }
        Ok(model)
    }

    /// Merges DOF pairs `(keep, remove)` by summing rows/columns, remapping
    /// wheel and partition indices.
    fn merge_dofs(&self, pairs: &[(usize, usize)]) -> Result<Self> {
        let n = self.n_dof();
        let mut target: Vec<usize> = (0..n).collect();
        for &(keep, remove) in pairs {
            if keep >= n || remove >= n {
                return Err(VtsiError::InvalidModel(format!(
                    "articulation pair ({keep}, {remove}) out of range"
                )));
            }
            if keep == remove {
                return Err(VtsiError::InvalidModel(format!(
                    "cannot merge DOF {keep} with itself"
                )));
            }
            if target[remove] != remove {
                return Err(VtsiError::InvalidModel(format!(
                    "DOF {remove} merged more than once"
                )));
            }
            // Resolve chains keep→...; reject cycles.
            let mut root = keep;
            let mut hops = 0;
            while target[root] != root {
                root = target[root];
                hops += 1;
                if hops > n {
                    return Err(VtsiError::InvalidModel("cyclic articulation map".into()));
                }
            }
            if root == remove {
                return Err(VtsiError::InvalidModel("cyclic articulation map".into()));
            }
            target[remove] = root;
        }
        // Compress to new indices.
        let mut new_index = vec![usize::MAX; n];
        let mut kept = 0;
        for i in 0..n {
            if target[i] == i {
                new_index[i] = kept;
                kept += 1;
            }
        }
        let resolve = |mut i: usize| {
            while target[i] != i {
                i = target[i];
            }
            new_index[i]
        };
        let mut m = DMatrix::zeros(kept, kept);
        let mut c = DMatrix::zeros(kept, kept);
        let mut k = DMatrix::zeros(kept, kept);
        let mut p = DVector::zeros(kept);
        for i in 0..n {
            let ri = resolve(i);
            p[ri] += self.system.p[i];
            for j in 0..n {
                let rj = resolve(j);
                m[(ri, rj)] += self.system.m[(i, j)];
                c[(ri, rj)] += self.system.c[(i, j)];
                k[(ri, rj)] += self.system.k[(i, j)];
            }
        }
        let mut wheel_dofs: Vec<usize> = self.wheel_dofs.iter().map(|&d| resolve(d)).collect();
        wheel_dofs.dedup();
        let map_set = |set: &[usize]| {
            let mut v: Vec<usize> = set.iter().map(|&d| resolve(d)).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let partition = DofPartition {
            carriage: map_set(&self.partition.carriage),
            wheels: map_set(&self.partition.wheels),
        };
        Ok(Self {
            system: SecondOrderSystem::new(m, c, k, p)?,
            wheel_dofs,
            wheel_offsets: self.wheel_offsets.clone(),
            partition,
            total_length: self.total_length,
        })
    }

    /// Loads a train model from a plain-text matrix file, so that models
    /// generated by external multibody software can be imported as
    /// structural matrices.
    ///
    /// Format: `#` comments; `n_dof N`; `n_wheels W`; then `M`, `C`, `K`
    /// each followed by N rows of N numbers (row-major); `P` followed by N
    /// numbers; `wheel_dofs` followed by W zero-based indices;
    /// `wheel_offsets` followed by W ascending distances (m);
    /// optional `length L`.
    pub fn from_matrix_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_matrix_text(&text)
    }

    /// See [`TrainModel::from_matrix_file`].
    pub fn from_matrix_text(text: &str) -> Result<Self> {
        let tokens: Vec<&str> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace())
            .collect();
        let mut cursor = 0usize;
        let mut expect = |what: &str| -> Result<&str> {
            let tok = tokens.get(cursor).copied().ok_or_else(|| {
                VtsiError::Parse(format!("unexpected end of file, wanted {what}"))
            })?;
            cursor += 1;
            Ok(tok)
        };
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| VtsiError::Parse(format!("bad number `{s}`")))
        };
        let parse_u = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| VtsiError::Parse(format!("bad index `{s}`")))
        };

        let mut key = expect("n_dof")?;
        if key != "n_dof" {
            return Err(VtsiError::Parse(format!("expected `n_dof`, got `{key}`")));
        }
        let n = parse_u(expect("dof count")?)?;
        key = expect("n_wheels")?;
        if key != "n_wheels" {
            return Err(VtsiError::Parse(format!("expected `n_wheels`, got `{key}`")));
        }
        let w = parse_u(expect("wheel count")?)?;

        let mut m = None;
        let mut c = None;
        let mut k = None;
        let mut p = None;
        let mut wheel_dofs: Option<Vec<usize>> = None;
        let mut wheel_offsets: Option<Vec<f64>> = None;
        let mut length = None;
        loop {
            let section = match expect("section") {
                Ok(s) => s,
                Err(_) => break,
            };
            match section {
                "M" | "C" | "K" => {
                    let mut data = Vec::with_capacity(n * n);
                    for _ in 0..n * n {
                        data.push(parse_f(expect("matrix entry")?)?);
                    }
                    let mat = DMatrix::from_row_slice(n, n, &data);
                    match section {
                        "M" => m = Some(mat),
                        "C" => c = Some(mat),
                        _ => k = Some(mat),
                    }
                }
                "P" => {
                    let mut data = Vec::with_capacity(n);
                    for _ in 0..n {
                        data.push(parse_f(expect("load entry")?)?);
                    }
                    p = Some(DVector::from_vec(data));
                }
                "wheel_dofs" => {
                    let mut v = Vec::with_capacity(w);
                    for _ in 0..w {
                        let d = parse_u(expect("wheel dof")?)?;
                        if d >= n {
                            return Err(VtsiError::Parse(format!("wheel dof {d} out of range")));
                        }
                        v.push(d);
                    }
                    wheel_dofs = Some(v);
                }
                "wheel_offsets" => {
                    let mut v = Vec::with_capacity(w);
                    for _ in 0..w {
                        v.push(parse_f(expect("wheel offset")?)?);
                    }
                    wheel_offsets = Some(v);
                }
                "length" => length = Some(parse_f(expect("train length")?)?),
                other => {
                    return Err(VtsiError::Parse(format!("unknown section `{other}`")));
                }
            }
        }
        let m = m.ok_or_else(|| VtsiError::Parse("missing M".into()))?;
        let c = c.ok_or_else(|| VtsiError::Parse("missing C".into()))?;
        let k = k.ok_or_else(|| VtsiError::Parse("missing K".into()))?;
        let p = p.ok_or_else(|| VtsiError::Parse("missing P".into()))?;
        let wheel_dofs = wheel_dofs.ok_or_else(|| VtsiError::Parse("missing wheel_dofs".into()))?;
        let wheel_offsets =
            wheel_offsets.ok_or_else(|| VtsiError::Parse("missing wheel_offsets".into()))?;
        if !wheel_offsets.windows(2).all(|p| p[0] < p[1]) {
            return Err(VtsiError::Parse("wheel offsets must be ascending".into()));
        }
        let carriage = (0..n).filter(|d| !wheel_dofs.contains(d)).collect();
        let total_length = length.unwrap_or(wheel_offsets.last().copied().unwrap_or(0.0));
        Ok(Self {
            system: SecondOrderSystem::new(m, c, k, p)?,
            wheel_dofs: wheel_dofs.clone(),
            wheel_offsets,
            partition: DofPartition {
                carriage,
                wheels: wheel_dofs,
            },
            total_length,
        })
    }
}
