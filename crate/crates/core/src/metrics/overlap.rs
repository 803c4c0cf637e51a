use crate::error::{Error, Result};
use crate::grid::Grid;

use super::{normalized_pair, MetricConfig};

/// Overlap of the two masks `{v >= t}` at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdOverlap {
    pub threshold: f64,
    pub intersection: usize,
    pub union: usize,
    pub size_a: usize,
    pub size_b: usize,
}

impl ThresholdOverlap {
    /// `None` when both masks are empty.
    pub fn iou(&self) -> Option<f64> {
        (self.union > 0).then(|| self.intersection as f64 / self.union as f64)
    }

    pub fn dice(&self) -> Option<f64> {
        let total = self.size_a + self.size_b;
        (total > 0).then(|| 2.0 * self.intersection as f64 / total as f64)
    }
}

/// Per-threshold overlap counts on already normalized values.
pub fn iou_dice_at(a: &[f64], b: &[f64], thresholds: &[f64]) -> Vec<ThresholdOverlap> {
    thresholds
        .iter()
        .map(|&t| {
            let mut o = ThresholdOverlap {
                threshold: t,
                intersection: 0,
                union: 0,
                size_a: 0,
                size_b: 0,
            };
            for (&x, &y) in a.iter().zip(b) {
                let (ia, ib) = (x >= t, y >= t);
                o.size_a += ia as usize;
                o.size_b += ib as usize;
                o.intersection += (ia && ib) as usize;
                o.union += (ia || ib) as usize;
            }
            o
        })
        .collect()
}

fn mean_over_thresholds(
    a: &Grid,
    b: &Grid,
    cfg: &MetricConfig,
    f: impl Fn(&ThresholdOverlap) -> Option<f64>,
) -> Result<f64> {
    let (a, b) = normalized_pair(a, b)?;
    let vals: Vec<f64> = iou_dice_at(a.as_slice(), b.as_slice(), &cfg.thresholds)
        .iter()
        .filter_map(f)
        .collect();
    if vals.is_empty() {
        return Err(Error::DegenerateInput(
            "every threshold leaves both masks empty".into(),
        ));
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Intersection over union averaged over the thresholds with a non-empty union.
pub fn miou_multi_threshold(a: &Grid, b: &Grid, cfg: &MetricConfig) -> Result<f64> {
    mean_over_thresholds(a, b, cfg, ThresholdOverlap::iou)
}

/// DICE averaged over the same thresholds as [`miou_multi_threshold`].
pub fn dice(a: &Grid, b: &Grid, cfg: &MetricConfig) -> Result<f64> {
    mean_over_thresholds(a, b, cfg, ThresholdOverlap::dice)
}
