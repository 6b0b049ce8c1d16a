//! Least-squares fits of bond-dimension growth laws.
//!
//! * `ExpInT`: `chi = f exp(v0 t)`, linear in `(ln f, v0)` after a log.
//! * `PowerInK`: `chi = g exp(v1 t^alpha / k^(alpha-1))` at fixed `t`;
//!   linear in `(ln g, v1)` for each `alpha`, so `alpha` is found by a 1D
//!   search on the projected residual.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ScalingModel {
    ExpInT,
    PowerInK { t: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: ScalingModel,
    /// `f` or `g`.
    pub prefactor: f64,
    /// `v0` or `v1`.
    pub rate: f64,
    /// Only for `PowerInK`.
    pub alpha: Option<f64>,
    /// Root-mean-square residual of `ln chi`.
    pub residual: f64,
    /// Slope of `ln ln chi` against `ln k` (only for `PowerInK`; needs
    /// every `chi > 1`).
    pub loglog_slope: Option<f64>,
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::DegenerateSamples("need at least two paired samples".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 1e-300 {
        return Err(Error::DegenerateSamples("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    Ok((a, b, (rss / n as f64).sqrt()))
}

pub fn fit_scaling(samples: &[(f64, f64)], model: ScalingModel) -> Result<ScalingFit> {
    if samples.len() < 3 {
        return Err(Error::DegenerateSamples(format!("need at least 3 samples, got {}", samples.len())));
    }
    if samples.iter().any(|&(x, chi)| !x.is_finite() || !(chi > 0.0) || !chi.is_finite()) {
        return Err(Error::DegenerateSamples("samples must be finite with chi > 0".into()));
    }
    let first = samples[0].1;
    if samples.iter().all(|s| s.1 == first) {
        return Err(Error::DegenerateSamples("bond dimension is constant".into()));
    }
    let x: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    match model {
        ScalingModel::ExpInT => {
            let (a, b, res) = linear_fit(&x, &y)?;
            Ok(ScalingFit {
                model,
                prefactor: a.exp(),
                rate: b,
                alpha: None,
                residual: res,
                loglog_slope: None,
            })
        }
        ScalingModel::PowerInK { t } => {
            if !(t > 0.0) || x.iter().any(|&k| !(k > 0.0)) {
                return Err(Error::DegenerateSamples("power-in-k fit needs t > 0 and k > 0".into()));
            }
            let fit_at = |alpha: f64| -> Result<(f64, f64, f64)> {
                let z: Vec<f64> = x.iter().map(|k| t.powf(alpha) * k.powf(1.0 - alpha)).collect();
                linear_fit(&z, &y)
            };
            let objective = |alpha: f64| fit_at(alpha).map(|r| r.2).unwrap_or(f64::INFINITY);
            let alpha = minimize_scalar(objective, 1.0 + 1e-6, 12.0);
            let (a, b, res) = fit_at(alpha)?;
            let loglog_slope = if samples.iter().all(|s| s.1 > 1.0) {
                let lx: Vec<f64> = x.iter().map(|k| k.ln()).collect();
                let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
                Some(linear_fit(&lx, &ly)?.1)
            } else {
                None
            };
            Ok(ScalingFit {
                model,
                prefactor: a.exp(),
                rate: b,
                alpha: Some(alpha),
                residual: res,
                loglog_slope,
            })
        }
    }
}

/// Grid scan followed by golden-section refinement around the best cell.
fn minimize_scalar(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const CELLS: usize = 400;
    let h = (hi - lo) / CELLS as f64;
    let best = (0..=CELLS)
        .map(|i| lo + h * i as f64)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap_or(lo);
    let (mut a, mut b) = ((best - h).max(lo), (best + h).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 * best.abs().max(1.0) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
