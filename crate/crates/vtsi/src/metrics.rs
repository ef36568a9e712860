//! Trace post-processing: series comparison and the high-frequency
//! oscillation metric used to quantify spurious contact-force content.

/// Relative L∞ distance `max|a − b| / max|a|` between two equally long
/// series; `a` is the reference.
pub fn relative_linf(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "series lengths differ");
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    }
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// Linear interpolation of a uniformly sampled series onto shifted sample
/// instants `t_i + shift` (clamped at the ends).
pub fn resample_shifted(values: &[f64], dt: f64, shift: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let t = i as f64 + shift / dt;
            let lo = t.floor().clamp(0.0, (n - 1) as f64);
            let hi = (lo + 1.0).min((n - 1) as f64);
            let frac = (t - lo).clamp(0.0, 1.0);
            values[lo as usize] * (1.0 - frac) + values[hi as usize] * frac
        })
        .collect()
}

/// RMS of the second difference of a series: a discrete high-pass that
/// weights content near the Nyquist rate and is insensitive to smooth
/// trends. Used as the spurious-oscillation measure for contact forces.
pub fn second_difference_rms(values: &[f64]) -> f64 {
    if values.len() < 3 {
        return 0.0;
    }
    let sum: f64 = values
        .windows(3)
        .map(|w| {
            let d = w[2] - 2.0 * w[1] + w[0];
            d * d
        })
        .sum();
    (sum / (values.len() - 2) as f64).sqrt()
}

/// Energy of the series components at and above `f_cut`, from a direct
/// DFT of the de-meaned series sampled at `dt`. O(n²); analysis windows
/// are short.
pub fn high_band_energy(values: &[f64], dt: f64, f_cut: f64) -> f64 {
    let n = values.len();
    if n < 4 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut energy = 0.0;
    for k in 1..=n / 2 {
        let f = k as f64 / (n as f64 * dt);
        if f < f_cut {
            continue;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (j, &v) in values.iter().enumerate() {
            let phase = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
            re += (v - mean) * phase.cos();
            im += (v - mean) * phase.sin();
        }
        energy += re * re + im * im;
    }
    energy / (n as f64 * n as f64)
}
