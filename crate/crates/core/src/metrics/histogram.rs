use crate::error::Result;
use crate::grid::Grid;

use super::{normalized_pair, MetricConfig};

/// Density-normalized histogram of `[0, 1]` values over `bins` equal bins;
/// 1.0 falls in the last bin.
pub fn histogram(values: &[f64], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &v in values {
        let i = ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        h[i] += 1.0;
    }
    let n = values.len() as f64;
    h.iter_mut().for_each(|c| *c /= n);
    h
}

/// 1-D earth mover's distance between histograms on `[0, 1]` with unit
/// ground distance per full range: `Σ |CDF_a - CDF_b| / bins`.
pub fn emd_prepared(ha: &[f64], hb: &[f64]) -> f64 {
    let bins = ha.len() as f64;
    let (mut ca, mut cb, mut total) = (0.0, 0.0, 0.0);
    for (a, b) in ha.iter().zip(hb) {
        ca += a;
        cb += b;
        total += (ca - cb).abs();
    }
    total / bins
}

pub fn emd(a: &Grid, b: &Grid, cfg: &MetricConfig) -> Result<f64> {
    let (a, b) = normalized_pair(a, b)?;
    Ok(emd_prepared(
        &histogram(a.as_slice(), cfg.bins),
        &histogram(b.as_slice(), cfg.bins),
    ))
}

pub fn histogram_intersection_prepared(ha: &[f64], hb: &[f64]) -> f64 {
    ha.iter().zip(hb).map(|(a, b)| a.min(*b)).sum()
}

pub fn histogram_intersection(a: &Grid, b: &Grid, cfg: &MetricConfig) -> Result<f64> {
    let (a, b) = normalized_pair(a, b)?;
    Ok(histogram_intersection_prepared(
        &histogram(a.as_slice(), cfg.bins),
        &histogram(b.as_slice(), cfg.bins),
    ))
}
