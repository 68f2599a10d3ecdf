//! Convergence-rate estimation on log-log scales.

use crate::error::{Error, Result};

/// Successive rates `log(y_k/y_{k−1}) / log(h_k/h_{k−1})`; the first entry is `None`.
pub fn successive_rates(h: &[f64], y: &[f64]) -> Vec<Option<f64>> {
    (0..h.len().min(y.len()))
        .map(|k| {
            if k == 0 || y[k] <= 0.0 || y[k - 1] <= 0.0 || h[k] == h[k - 1] {
                None
            } else {
                Some((y[k] / y[k - 1]).ln() / (h[k] / h[k - 1]).ln())
            }
        })
        .collect()
}

/// Least-squares slope of `log y` against `log h`.
///
/// Requires at least two points, all positive, with at least two distinct `h`.
pub fn loglog_slope(h: &[f64], y: &[f64]) -> Result<f64> {
    if h.len() != y.len() || h.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "slope fit needs at least two (h, y) pairs, got {} and {}",
            h.len(),
            y.len()
        )));
    }
    if let Some(k) = (0..h.len()).find(|&k| !(h[k] > 0.0 && y[k] > 0.0 && y[k].is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "slope fit needs positive finite data, got h = {}, y = {} at index {k}",
            h[k], y[k]
        )));
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope fit needs at least two distinct h values".into()));
    }
    Ok(sxy / sxx)
}
