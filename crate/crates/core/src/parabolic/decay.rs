//! Exponential decay fits for norm histories.

use crate::error::{Error, Result};

/// `norm(t) ~ k * exp(-alpha * t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub k: f64,
    pub alpha: f64,
}

/// Least-squares line through `(t, ln norm)` over the later half of the
/// series. An all-zero series reports `alpha = +inf` and `k = 0`.
pub fn fit_exponential_decay(series: &[(f64, f64)]) -> Result<DecayFit> {
    if series.len() < 5 {
        return Err(Error::DegenerateSeries(format!(
            "need at least 5 samples, got {}",
            series.len()
        )));
    }
    if series.iter().any(|&(t, v)| !t.is_finite() || !v.is_finite() || v < 0.0) {
        return Err(Error::DegenerateSeries("norms must be finite and non-negative".into()));
    }
    let tail = &series[series.len() / 2..];
    let zeros = tail.iter().filter(|p| p.1 == 0.0).count();
    if zeros == tail.len() {
        return Ok(DecayFit {
            k: 0.0,
            alpha: f64::INFINITY,
        });
    }
    if zeros > 0 {
        return Err(Error::DegenerateSeries("tail mixes zero and nonzero norms".into()));
    }
    let m = tail.len() as f64;
    let tm = tail.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = tail.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let sxx: f64 = tail.iter().map(|p| (p.0 - tm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateSeries("all tail samples share one time".into()));
    }
    let sxy: f64 = tail.iter().map(|p| (p.0 - tm) * (p.1.ln() - ym)).sum();
    let slope = sxy / sxx;
    Ok(DecayFit {
        k: (ym - slope * tm).exp(),
        alpha: -slope,
    })
}
