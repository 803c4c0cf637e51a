//! Agreement metrics between an uncertainty map and a reference map.
//!
//! Every metric first min-max normalizes both maps to `[0, 1]`
//! independently. A constant map is an error for the correlation metrics
//! and normalizes to all zeros for the rest. Functions with a `_prepared`
//! suffix skip that step and take values that are already normalized.

mod chamfer;
mod correlation;
mod divergence;
mod histogram;
mod overlap;
mod report;

pub use chamfer::{chamfer, chamfer_masks, distance_to_mask, percentile, Mask};
pub use correlation::{cosine, cosine_prepared, fractional_ranks, pearson, pearson_prepared, spearman};
pub use divergence::{js_div, kl_div, kl_prepared, js_prepared, l2_dist, l2_prepared, to_distribution};
pub use histogram::{emd, emd_prepared, histogram, histogram_intersection, histogram_intersection_prepared};
pub use overlap::{dice, iou_dice_at, miou_multi_threshold, ThresholdOverlap};
pub use report::{aggregate_sections, Aggregate, MetricReport, SectionMetrics};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub bins: usize,
    pub thresholds: Vec<f64>,
    pub chamfer_percentile: f64,
    pub smoothing_eps: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            bins: 64,
            thresholds: (1..=9).map(|i| i as f64 / 10.0).collect(),
            chamfer_percentile: 90.0,
            smoothing_eps: 1e-12,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::Config(format!("bins must be at least 2, got {}", self.bins)));
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::Config(format!(
                "thresholds must be a non-empty list inside (0, 1), got {:?}",
                self.thresholds
            )));
        }
        if !(self.chamfer_percentile > 0.0 && self.chamfer_percentile < 100.0) {
            return Err(Error::Config(format!(
                "chamfer percentile must lie in (0, 100), got {}",
                self.chamfer_percentile
            )));
        }
        if !(self.smoothing_eps >= 0.0) {
            return Err(Error::Config("smoothing_eps must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricGroup {
    Correlation,
    Overlap,
    Distance,
}

impl MetricGroup {
    pub fn label(self) -> &'static str {
        match self {
            MetricGroup::Correlation => "correlation (higher is better)",
            MetricGroup::Overlap => "overlap (higher is better)",
            MetricGroup::Distance => "distance (lower is better)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Pearson,
    Spearman,
    Cosine,
    MeanIou,
    Dice,
    HistIntersection,
    Kl,
    Js,
    L2,
    Chamfer,
    Emd,
}

impl Metric {
    pub const ALL: [Metric; 11] = [
        Metric::Pearson,
        Metric::Spearman,
        Metric::Cosine,
        Metric::MeanIou,
        Metric::Dice,
        Metric::HistIntersection,
        Metric::Kl,
        Metric::Js,
        Metric::L2,
        Metric::Chamfer,
        Metric::Emd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Pearson => "pearson",
            Metric::Spearman => "spearman",
            Metric::Cosine => "cosine",
            Metric::MeanIou => "miou",
            Metric::Dice => "dice",
            Metric::HistIntersection => "hist_int",
            Metric::Kl => "kl",
            Metric::Js => "js",
            Metric::L2 => "l2",
            Metric::Chamfer => "chamfer",
            Metric::Emd => "emd",
        }
    }

    pub fn from_name(name: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn group(self) -> MetricGroup {
        match self {
            Metric::Pearson | Metric::Spearman | Metric::Cosine => MetricGroup::Correlation,
            Metric::MeanIou | Metric::Dice | Metric::HistIntersection => MetricGroup::Overlap,
            Metric::Kl | Metric::Js | Metric::L2 | Metric::Chamfer | Metric::Emd => MetricGroup::Distance,
        }
    }

    /// Value attained when a map is compared with itself.
    pub fn ideal(self) -> f64 {
        match self.group() {
            MetricGroup::Correlation | MetricGroup::Overlap => 1.0,
            MetricGroup::Distance => 0.0,
        }
    }

    pub fn evaluate(self, a: &Grid, b: &Grid, cfg: &MetricConfig) -> Result<f64> {
        match self {
            Metric::Pearson => pearson(a, b),
            Metric::Spearman => spearman(a, b),
            Metric::Cosine => cosine(a, b),
            Metric::MeanIou => miou_multi_threshold(a, b, cfg),
            Metric::Dice => dice(a, b, cfg),
            Metric::HistIntersection => histogram_intersection(a, b, cfg),
            Metric::Kl => kl_div(a, b, cfg),
            Metric::Js => js_div(a, b, cfg),
            Metric::L2 => l2_dist(a, b),
            Metric::Chamfer => chamfer(a, b, cfg),
            Metric::Emd => emd(a, b, cfg),
        }
    }
}

/// Evaluate every metric; a failure of one metric does not stop the others.
pub fn evaluate_all(a: &Grid, b: &Grid, cfg: &MetricConfig) -> Vec<(Metric, Result<f64>)> {
    Metric::ALL
        .into_iter()
        .map(|m| (m, m.evaluate(a, b, cfg)))
        .collect()
}

/// Shape check plus independent min-max normalization of both maps.
pub(crate) fn normalized_pair(a: &Grid, b: &Grid) -> Result<(Grid, Grid)> {
    a.check_same_shape(b)?;
    Ok((a.min_max_normalized(), b.min_max_normalized()))
}

pub(crate) fn require_non_constant(a: &Grid, b: &Grid) -> Result<()> {
    if a.is_constant() || b.is_constant() {
        return Err(Error::DegenerateInput(
            "correlation is undefined for a constant map".into(),
        ));
    }
    Ok(())
}
