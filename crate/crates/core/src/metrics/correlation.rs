use crate::error::{Error, Result};
use crate::grid::Grid;

use super::{normalized_pair, require_non_constant};

/// Product-moment correlation of two equally long samples.
pub fn pearson_prepared(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::DegenerateInput("zero variance".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

pub fn pearson(a: &Grid, b: &Grid) -> Result<f64> {
    a.check_same_shape(b)?;
    require_non_constant(a, b)?;
    let (a, b) = normalized_pair(a, b)?;
    pearson_prepared(a.as_slice(), b.as_slice())
}

/// 1-based ranks; tied values share the average of the ranks they span.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of fractional ranks.
pub fn spearman(a: &Grid, b: &Grid) -> Result<f64> {
    a.check_same_shape(b)?;
    require_non_constant(a, b)?;
    let (a, b) = normalized_pair(a, b)?;
    pearson_prepared(&fractional_ranks(a.as_slice()), &fractional_ranks(b.as_slice()))
}

pub fn cosine_prepared(a: &[f64], b: &[f64]) -> Result<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateInput("zero-norm map".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn cosine(a: &Grid, b: &Grid) -> Result<f64> {
    let (a, b) = normalized_pair(a, b)?;
    cosine_prepared(a.as_slice(), b.as_slice())
}
