use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-run figures of merit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean squared tracking error over the scoring window (rad²).
    pub mse: f64,
    /// `None` when the output never stays inside the band.
    pub settling_time: Option<f64>,
    /// `Σ u_t² T`
    pub input_energy: f64,
}

/// Mean of `(y_k − r_k)²` over samples with `t_k = kT ∈ (0, window]`.
pub fn mse(y: &[f64], r: &[f64], dt: f64, window: f64) -> Result<f64> {
    if y.len() != r.len() {
        return Err(Error::Dimension(format!("{} outputs vs {} references", y.len(), r.len())));
    }
    let last = ((window / dt) + 1e-9).floor() as usize;
    let last = last.min(y.len().saturating_sub(1));
    if last == 0 {
        return Err(Error::InvalidParameter("scoring window holds no samples".into()));
    }
    let sum: f64 = (1..=last).map(|k| (y[k] - r[k]).powi(2)).sum();
    Ok(sum / last as f64)
}

/// First time after which `|y − r| ≤ band·|r|` holds to the end of the record.
pub fn settling_time(y: &[f64], r: f64, band: f64, dt: f64) -> Result<Option<f64>> {
    if r == 0.0 || !r.is_finite() {
        return Err(Error::InvalidParameter("settling time needs a nonzero reference".into()));
    }
    let tol = band * r.abs();
    match y.iter().rposition(|v| !((v - r).abs() <= tol)) {
        None => Ok(Some(0.0)),
        Some(k) if k + 1 < y.len() => Ok(Some((k + 1) as f64 * dt)),
        Some(_) => Ok(None),
    }
}

pub fn input_energy(u: &[f64], dt: f64) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>() * dt
}

/// 25th, 50th and 75th percentiles with linear interpolation between order
/// statistics. `None` for an empty sample.
pub fn quartiles(samples: &[f64]) -> Option<[f64; 3]> {
    if samples.is_empty() {
        return None;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (s.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
    };
    Some([at(0.25), at(0.5), at(0.75)])
}
