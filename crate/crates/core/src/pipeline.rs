//! Decoder-pair MI maps combined into one uncertainty map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FeatureMap, Grid};
use crate::io::SectionDataset;
use crate::mi::{windowed_mi_map_features, MiConfig, MiMap, WindowMode};
use crate::resample::{align_bilinear, upsample_bicubic};

pub const RADMI_TAG: &str = "radmi";

/// Nonnegative per-pixel uncertainty scores with the producing method.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMap {
    pub values: Grid,
    pub method: String,
}

impl UncertaintyMap {
    pub fn new(values: Grid, method: impl Into<String>) -> Self {
        Self {
            values,
            method: method.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// `w_l ∝ H_l * W_l`.
    Resolution,
    /// `w_l = 1 / (L - 1)`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationConfig {
    pub weighting: Weighting,
    /// Min-max normalize each pair's MI map before weighting.
    pub normalize_per_pair: bool,
    /// Output resolution; `None` uses the section's output resolution.
    pub output_hw: Option<(usize, usize)>,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            weighting: Weighting::Resolution,
            normalize_per_pair: true,
            output_hw: None,
        }
    }
}

/// Weights proportional to pixel count, summing to one.
pub fn resolution_weights(resolutions: &[(usize, usize)]) -> Result<Vec<f64>> {
    if resolutions.is_empty() {
        return Err(Error::DegenerateInput("no resolutions to weight".into()));
    }
    if resolutions.iter().any(|&(h, w)| h == 0 || w == 0) {
        return Err(Error::DegenerateInput("resolutions must be positive".into()));
    }
    let total: f64 = resolutions.iter().map(|&(h, w)| (h * w) as f64).sum();
    Ok(resolutions
        .iter()
        .map(|&(h, w)| (h * w) as f64 / total)
        .collect())
}

pub fn uniform_weights(count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::DegenerateInput("no maps to weight".into()));
    }
    Ok(vec![1.0 / count as f64; count])
}

/// Pixelwise weighted sum of equally shaped maps.
pub fn aggregate(maps: &[Grid], weights: &[f64]) -> Result<UncertaintyMap> {
    if maps.is_empty() || maps.len() != weights.len() {
        return Err(Error::DegenerateInput(format!(
            "{} maps with {} weights",
            maps.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::DegenerateInput(format!("weights sum to {total}, not 1")));
    }
    let (h, w) = maps[0].hw();
    for m in &maps[1..] {
        maps[0].check_same_shape(m)?;
    }
    let mut out = vec![0.0; h * w];
    for (m, &wt) in maps.iter().zip(weights) {
        for (o, v) in out.iter_mut().zip(m.as_slice()) {
            *o += wt * v;
        }
    }
    Ok(UncertaintyMap::new(Grid::new(h, w, out)?, RADMI_TAG))
}

/// Normalize, upsample and combine per-pair MI maps.
///
/// Weights are derived from each map's source resolution. Bicubic
/// overshoot below zero is clamped away.
pub fn combine_pair_maps(
    maps: &[MiMap],
    output_hw: (usize, usize),
    cfg: &AggregationConfig,
) -> Result<UncertaintyMap> {
    let weights = match cfg.weighting {
        Weighting::Resolution => {
            resolution_weights(&maps.iter().map(|m| m.resolution).collect::<Vec<_>>())?
        }
        Weighting::Uniform => uniform_weights(maps.len())?,
    };
    let upsampled = maps
        .iter()
        .map(|m| {
            let grid = if cfg.normalize_per_pair {
                m.values.min_max_normalized()
            } else {
                m.values.clone()
            };
            upsample_bicubic(&grid, output_hw)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = aggregate(&upsampled, &weights)?;
    out.values.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(out)
}

/// MI map for each consecutive decoder pair, finer layer aligned to the
/// coarser one.
pub fn pair_mi_maps(features: &[FeatureMap], mi_cfg: &MiConfig) -> Result<Vec<MiMap>> {
    if features.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "need at least 2 decoder layers, got {}",
            features.len()
        )));
    }
    features
        .windows(2)
        .map(|pair| {
            let coarse = &pair[0];
            let fine = align_bilinear(&pair[1], coarse.hw())?;
            windowed_mi_map_features(coarse, &fine, mi_cfg, WindowMode::Fast)
        })
        .collect()
}

/// Full map from decoder features ordered coarse to fine.
pub fn radmi_features(
    features: &[FeatureMap],
    output_hw: (usize, usize),
    mi_cfg: &MiConfig,
    agg_cfg: &AggregationConfig,
) -> Result<UncertaintyMap> {
    let finest = features
        .iter()
        .map(|f| f.hw())
        .fold((0, 0), |(h, w), (fh, fw)| (h.max(fh), w.max(fw)));
    if output_hw.0 < finest.0 || output_hw.1 < finest.1 {
        return Err(Error::Config(format!(
            "output {}x{} is smaller than the finest layer {}x{}",
            output_hw.0, output_hw.1, finest.0, finest.1
        )));
    }
    let maps = pair_mi_maps(features, mi_cfg)?;
    combine_pair_maps(&maps, output_hw, agg_cfg)
}

/// Uncertainty map for one section.
pub fn radmi(
    section: &SectionDataset,
    mi_cfg: &MiConfig,
    agg_cfg: &AggregationConfig,
) -> Result<UncertaintyMap> {
    let features = section
        .decoder_features
        .iter()
        .map(FeatureMap::from_tensor)
        .collect::<Result<Vec<_>>>()?;
    let output_hw = agg_cfg.output_hw.unwrap_or_else(|| section.output_hw());
    radmi_features(&features, output_hw, mi_cfg, agg_cfg)
}
