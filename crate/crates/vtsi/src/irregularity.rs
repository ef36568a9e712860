//! Elevation track irregularities synthesized from a one-sided power
//! spectral density by the spectral representation method.
//!
//! The PSD model is
//!
//! ```text
//! S(Ω) = A·Ω_c² / ((Ω² + Ω_r²)(Ω² + Ω_c²))      [m²·rad/m]
//! ```
//!
//! sampled at `Ω_n = n·ΔΩ`, `ΔΩ = (Ω_u − Ω_l)/N`, `n = 1..N−1`, and the
//! profile is
//!
//! ```text
//! ρ(x) = √2 Σ A_n cos(Ω_n x + φ_n),
//! A_n  = √((S(Ω_n)/π + a_n S(0))·ΔΩ),  a₁ = 4/(6π), a₂ = 1/(6π), else 0
//! ```
//!
//! with phases φ_n i.i.d. uniform on [0, 2π). The generated profile is
//! rescaled so its largest deviation over a 1 cm grid equals a class
//! tolerance (2.7 mm for FRA track class 6), and gated to zero before the
//! track start with a 1 m linear ramp so no step enters the constraint.
//!
//! Randomness: one `ChaCha8` stream seeded with the profile seed; φ_n is
//! the n-th draw of that stream. Same seed, same profile, bit for bit.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, VtsiError};

/// Grid spacing used when normalizing to the class tolerance (m). Finer
/// than the shortest synthesized wavelength 2π/Ω_u ≈ 0.46 m.
pub const NORMALIZATION_STEP: f64 = 0.01;

/// Length of the linear blend from zero to the full profile (m).
pub const RAMP_LENGTH: f64 = 1.0;

/// Maximum tolerable deviation for FRA track class 6 (m).
pub const CLASS6_TOLERANCE: f64 = 2.7e-3;

/// PSD model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdParams {
    /// Roughness coefficient A (m²·rad/m).
    pub roughness: f64,
    /// Break frequency Ω_r (rad/m).
    pub omega_r: f64,
    /// Cutoff frequency Ω_c (rad/m).
    pub omega_c: f64,
    /// Lowest synthesized frequency Ω_l (rad/m).
    pub omega_l: f64,
    /// Highest synthesized frequency Ω_u (rad/m).
    pub omega_u: f64,
    /// Number of frequency increments N.
    pub n_freq: usize,
}

impl Default for PsdParams {
    fn default() -> Self {
        // FRA class-6 roughness with the customary band and resolution.
        Self {
            roughness: 1.5e-6,
            omega_r: 0.0206,
            omega_c: 0.825,
            omega_l: 0.00383,
            omega_u: 13.573_83,
            n_freq: 3540,
        }
    }
}

/// Elevation PSD `S(Ω)`; rejects non-positive frequencies.
pub fn psd(omega: f64, p: &PsdParams) -> Result<f64> {
    if omega <= 0.0 {
        return Err(VtsiError::InvalidConfig(format!(
            "PSD frequency must be positive, got {omega}"
        )));
    }
    Ok(p.roughness * p.omega_c * p.omega_c
        / ((omega * omega + p.omega_r * p.omega_r) * (omega * omega + p.omega_c * p.omega_c)))
}

/// `S(0) = A/Ω_r²`, the finite zero-frequency limit of the model.
pub fn psd_at_zero(p: &PsdParams) -> f64 {
    p.roughness / (p.omega_r * p.omega_r)
}

/// Common surface for analytic and resampled irregularity profiles.
pub trait TrackIrregularity: Send + Sync {
    /// Elevation deviation ρ(x) in meters, positive upward.
    fn eval(&self, x: f64) -> f64;
    /// dρ/dx.
    fn eval_d1(&self, x: f64) -> f64;
    /// d²ρ/dx².
    fn eval_d2(&self, x: f64) -> f64;
}

/// A generated cosine-series irregularity profile.
#[derive(Debug, Clone)]
pub struct IrregularityProfile {
    /// Series amplitudes A_n (m), before normalization.
    pub amplitudes: Vec<f64>,
    /// Discrete frequencies Ω_n (rad/m).
    pub frequencies: Vec<f64>,
    /// Random phases φ_n (rad).
    pub phases: Vec<f64>,
    /// Normalization factor applied to the raw series.
    pub scale: f64,
    /// Profile is identically zero at and before this coordinate (m).
    pub zero_before: f64,
    /// Seed the phases were drawn from.
    pub seed: u64,
}

impl IrregularityProfile {
    /// Generates and normalizes a profile.
    ///
    /// The raw series is sampled every [`NORMALIZATION_STEP`] on
    /// `[zero_before, domain_end]` (gate included) and rescaled so the
    /// largest deviation equals `tolerance` exactly on that grid.
    pub fn generate(
        seed: u64,
        params: &PsdParams,
        tolerance: f64,
        zero_before: f64,
        domain_end: f64,
    ) -> Result<Self> {
        if params.n_freq < 3 {
            return Err(VtsiError::InvalidConfig(
                "spectral representation needs at least 3 frequency increments".into(),
            ));
        }
        if params.omega_u <= params.omega_l || params.omega_l <= 0.0 {
            return Err(VtsiError::InvalidConfig(
                "degenerate frequency band: need 0 < omega_l < omega_u".into(),
            ));
        }
        if tolerance <= 0.0 || domain_end <= zero_before {
            return Err(VtsiError::InvalidConfig(
                "irregularity tolerance and domain must be positive".into(),
            ));
        }
        let n = params.n_freq;
        let d_omega = (params.omega_u - params.omega_l) / n as f64;
        let s0 = psd_at_zero(params);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut frequencies = Vec::with_capacity(n - 1);
        let mut amplitudes = Vec::with_capacity(n - 1);
        let mut phases = Vec::with_capacity(n - 1);
        for i in 1..n {
            let omega = i as f64 * d_omega;
            let a_n = match i {
                1 => 4.0 / (6.0 * std::f64::consts::PI),
                2 => 1.0 / (6.0 * std::f64::consts::PI),
                _ => 0.0,
            };
            let var = (psd(omega, params)? / std::f64::consts::PI + a_n * s0) * d_omega;
            frequencies.push(omega);
            amplitudes.push(var.sqrt());
            phases.push(rng.gen_range(0.0..std::f64::consts::TAU));
        }
        let mut profile = Self {
            amplitudes,
            frequencies,
            phases,
            scale: 1.0,
            zero_before,
            seed,
        };
        let count = ((domain_end - zero_before) / NORMALIZATION_STEP).ceil() as usize + 1;
        let samples = profile.sample_grid(zero_before, NORMALIZATION_STEP, count);
        let max = samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if max == 0.0 {
            return Err(VtsiError::InvalidConfig(
                "generated profile is identically zero on the domain".into(),
            ));
        }
        profile.scale = tolerance / max;
        Ok(profile)
    }

    /// Gate value and slope at `x`: 0 before `zero_before`, linear over the
    /// ramp, 1 beyond.
    fn gate(&self, x: f64) -> (f64, f64) {
        let s = x - self.zero_before;
        if s <= 0.0 {
            (0.0, 0.0)
        } else if s < RAMP_LENGTH {
            (s / RAMP_LENGTH, 1.0 / RAMP_LENGTH)
        } else {
            (1.0, 0.0)
        }
    }

    fn series(&self, x: f64) -> (f64, f64, f64) {
        let mut v = 0.0;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for ((&a, &w), &phi) in self
            .amplitudes
            .iter()
            .zip(&self.frequencies)
            .zip(&self.phases)
        {
            let (sin, cos) = (w * x + phi).sin_cos();
            v += a * cos;
            d1 -= a * w * sin;
            d2 -= a * w * w * cos;
        }
        let r = std::f64::consts::SQRT_2;
        (r * v, r * d1, r * d2)
    }

    /// Evaluates the gated, normalized profile on a uniform grid using a
    /// per-term rotation recurrence instead of per-point trig; identical in
    /// exact arithmetic to [`TrackIrregularity::eval`] at the grid points
    /// and used for normalization, export and spectral estimation.
    pub fn sample_grid(&self, x0: f64, dx: f64, count: usize) -> Vec<f64> {
        let mut acc = vec![0.0_f64; count];
        for ((&a, &w), &phi) in self
            .amplitudes
            .iter()
            .zip(&self.frequencies)
            .zip(&self.phases)
        {
            let (step_sin, step_cos) = (w * dx).sin_cos();
            let (mut s, mut c) = (w * x0 + phi).sin_cos();
            for slot in acc.iter_mut() {
                *slot += a * c;
                let c_next = c * step_cos - s * step_sin;
                s = s * step_cos + c * step_sin;
                c = c_next;
            }
        }
        let r = std::f64::consts::SQRT_2 * self.scale;
        for (i, slot) in acc.iter_mut().enumerate() {
            let (g, _) = self.gate(x0 + i as f64 * dx);
            *slot *= r * g;
        }
        acc
    }

    /// Writes `(x, ρ)` samples as CSV.
    pub fn export_csv(&self, path: &Path, x0: f64, dx: f64, count: usize) -> Result<()> {
        use std::io::Write;
        let samples = self.sample_grid(x0, dx, count);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "x,rho")?;
        for (i, v) in samples.iter().enumerate() {
            writeln!(out, "{:.14e},{:.14e}", x0 + i as f64 * dx, v)?;
        }
        Ok(())
    }
}

impl TrackIrregularity for IrregularityProfile {
    fn eval(&self, x: f64) -> f64 {
        let (g, _) = self.gate(x);
        if g == 0.0 {
            return 0.0;
        }
        let (v, _, _) = self.series(x);
        self.scale * g * v
    }

    fn eval_d1(&self, x: f64) -> f64 {
        let (g, gp) = self.gate(x);
        if g == 0.0 && gp == 0.0 {
            return 0.0;
        }
        let (v, d1, _) = self.series(x);
        self.scale * (gp * v + g * d1)
    }

    fn eval_d2(&self, x: f64) -> f64 {
        let (g, gp) = self.gate(x);
        if g == 0.0 && gp == 0.0 {
            return 0.0;
        }
        let (_, d1, d2) = self.series(x);
        self.scale * (2.0 * gp * d1 + g * d2)
    }
}

/// A profile replayed from tabulated `(x, ρ)` samples with linear
/// interpolation; zero outside the tabulated range.
#[derive(Debug, Clone)]
pub struct SampledIrregularity {
    xs: Vec<f64>,
    values: Vec<f64>,
}

impl SampledIrregularity {
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
                continue;
            }
            let mut parts = line.split(',');
            let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
                return Err(VtsiError::Parse(format!("line {}: expected `x,rho`", ln + 1)));
            };
            let x: f64 = a
                .trim()
                .parse()
                .map_err(|_| VtsiError::Parse(format!("line {}: bad x `{a}`", ln + 1)))?;
            let v: f64 = b
                .trim()
                .parse()
                .map_err(|_| VtsiError::Parse(format!("line {}: bad rho `{b}`", ln + 1)))?;
            xs.push(x);
            values.push(v);
        }
        if xs.len() < 2 {
            return Err(VtsiError::Parse("need at least two samples".into()));
        }
        if !xs.windows(2).all(|w| w[0] < w[1]) {
            return Err(VtsiError::Parse("sample positions must be ascending".into()));
        }
        Ok(Self { xs, values })
    }

    fn bracket(&self, x: f64) -> Option<usize> {
        if x < self.xs[0] || x > *self.xs.last().unwrap() {
            return None;
        }
        let i = self.xs.partition_point(|&v| v <= x);
        Some(i.clamp(1, self.xs.len() - 1) - 1)
    }
}

impl TrackIrregularity for SampledIrregularity {
    fn eval(&self, x: f64) -> f64 {
        match self.bracket(x) {
            None => 0.0,
            Some(i) => {
                let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
                self.values[i] * (1.0 - t) + self.values[i + 1] * t
            }
        }
    }

    fn eval_d1(&self, x: f64) -> f64 {
        match self.bracket(x) {
            None => 0.0,
            Some(i) => (self.values[i + 1] - self.values[i]) / (self.xs[i + 1] - self.xs[i]),
        }
    }

    fn eval_d2(&self, _x: f64) -> f64 {
        0.0 // piecewise linear
    }
}
