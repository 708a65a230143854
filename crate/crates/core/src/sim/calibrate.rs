use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::SimError;

/// One measured latency: scale, camera count, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub r: f64,
    pub n_prime: usize,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyFit {
    pub t0: f64,
    pub alpha: f64,
    /// `None` when every sample uses the same camera count.
    pub beta: Option<f64>,
    /// Largest `|T_fit - T| / T` over the samples.
    pub max_rel_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityFit {
    pub q_max: f64,
    pub gamma: f64,
    /// Largest `|Q_fit - Q|` over the samples.
    pub max_abs_residual: f64,
}

/// Least squares on `ln T = ln t0 + alpha ln r + beta ln(N'/N)`.
pub fn calibrate_model(samples: &[LatencySample], n_total: usize) -> Result<LatencyFit, SimError> {
    if samples.len() < 3 {
        return Err(SimError::Calibration(format!("need at least 3 samples, got {}", samples.len())));
    }
    let bad = samples.iter().any(|s| {
        !(s.r > 0.0 && s.t > 0.0 && s.r.is_finite() && s.t.is_finite()) || s.n_prime == 0 || s.n_prime > n_total
    });
    if bad {
        return Err(SimError::Calibration("samples need r > 0, T > 0 and 0 < N' <= N".into()));
    }
    let first_r = samples[0].r;
    if samples.iter().all(|s| s.r == first_r) {
        return Err(SimError::Calibration("samples must span at least two scales".into()));
    }
    let with_beta = samples.iter().any(|s| s.n_prime != samples[0].n_prime);
    let cols = if with_beta { 3 } else { 2 };
    let design = DMatrix::from_fn(samples.len(), cols, |i, j| match j {
        0 => 1.0,
        1 => samples[i].r.ln(),
        _ => (samples[i].n_prime as f64 / n_total as f64).ln(),
    });
    let rhs = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.t.ln()));
    let x = solve_least_squares(design, rhs)?;

    let t0 = x[0].exp();
    let alpha = x[1];
    let beta = with_beta.then(|| x[2]);
    let max_rel_residual = samples
        .iter()
        .map(|s| {
            let fit = t0 * s.r.powf(alpha) * (s.n_prime as f64 / n_total as f64).powf(beta.unwrap_or(0.0));
            (fit - s.t).abs() / s.t
        })
        .fold(0.0, f64::max);
    Ok(LatencyFit { t0, alpha, beta, max_rel_residual })
}

/// Least squares on `ln Q = ln q_max + gamma ln r` over `(r, Q)` pairs.
pub fn fit_quality(samples: &[(f64, f64)]) -> Result<QualityFit, SimError> {
    if samples.len() < 2 || samples.iter().any(|&(r, q)| !(r > 0.0 && q > 0.0)) {
        return Err(SimError::Calibration("quality fit needs at least 2 samples with r, Q > 0".into()));
    }
    let design = DMatrix::from_fn(samples.len(), 2, |i, j| if j == 0 { 1.0 } else { samples[i].0.ln() });
    let rhs = DVector::from_iterator(samples.len(), samples.iter().map(|&(_, q)| q.ln()));
    let x = solve_least_squares(design, rhs)?;
    let (q_max, gamma) = (x[0].exp(), x[1]);
    let max_abs_residual = samples.iter().map(|&(r, q)| (q_max * r.powf(gamma) - q).abs()).fold(0.0, f64::max);
    Ok(QualityFit { q_max, gamma, max_abs_residual })
}

fn solve_least_squares(design: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>, SimError> {
    let svd = design.svd(true, true);
    let s_max = svd.singular_values.max();
    if svd.singular_values.iter().any(|&s| s <= s_max * 1e-10) {
        return Err(SimError::Calibration("degenerate design matrix".into()));
    }
    svd.solve(&rhs, 0.0).map_err(|e| SimError::Calibration(e.to_string()))
}
