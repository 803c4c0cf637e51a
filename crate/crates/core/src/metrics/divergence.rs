use crate::error::Result;
use crate::grid::Grid;

use super::{normalized_pair, MetricConfig};

/// Add `eps` to every entry and rescale to unit sum.
pub fn to_distribution(values: &[f64], eps: f64) -> Vec<f64> {
    let total: f64 = values.iter().map(|v| v + eps).sum();
    if total == 0.0 {
        return vec![1.0 / values.len() as f64; values.len()];
    }
    values.iter().map(|v| (v + eps) / total).collect()
}

/// `Σ p ln(p / q)` over distributions; terms with `p = 0` vanish.
pub fn kl_prepared(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum::<f64>()
        .max(0.0)
}

pub fn js_prepared(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    (0.5 * kl_prepared(p, &m) + 0.5 * kl_prepared(q, &m)).clamp(0.0, std::f64::consts::LN_2)
}

pub fn kl_div(a: &Grid, b: &Grid, cfg: &MetricConfig) -> Result<f64> {
    let (a, b) = normalized_pair(a, b)?;
    Ok(kl_prepared(
        &to_distribution(a.as_slice(), cfg.smoothing_eps),
        &to_distribution(b.as_slice(), cfg.smoothing_eps),
    ))
}

pub fn js_div(a: &Grid, b: &Grid, cfg: &MetricConfig) -> Result<f64> {
    let (a, b) = normalized_pair(a, b)?;
    Ok(js_prepared(
        &to_distribution(a.as_slice(), cfg.smoothing_eps),
        &to_distribution(b.as_slice(), cfg.smoothing_eps),
    ))
}

/// Root-mean-square difference.
pub fn l2_prepared(a: &[f64], b: &[f64]) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / a.len() as f64).sqrt()
}

pub fn l2_dist(a: &Grid, b: &Grid) -> Result<f64> {
    let (a, b) = normalized_pair(a, b)?;
    Ok(l2_prepared(a.as_slice(), b.as_slice()))
}
