//! Browser demo: RADMI on a synthetic boundary scene and the windowed
//! estimator against the analytic MI of a correlated field.
//!
//! The plain functions run anywhere; the `#[wasm_bindgen]` items are thin
//! wrappers for the page in `www/`.

use radmi_core::metrics::{Metric, MetricConfig};
use radmi_core::pipeline::radmi_features;
use radmi_core::synth::{gen_boundary_pyramid, gen_correlated_field, SyntheticSpec};
use radmi_core::{windowed_mi_map, AggregationConfig, FeatureMap, Grid, MiConfig, Weighting, WindowMode};
use wasm_bindgen::prelude::*;

/// Side of the demo scene.
pub const SCENE_SIDE: usize = 96;
/// Side of the correlated field used for the MI curve.
pub const FIELD_SIDE: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub seed: u64,
    pub patch: usize,
    pub epsilon: f64,
    pub uniform: bool,
    pub normalize: bool,
    /// Decoder layers in the synthetic stack, 2 or 3.
    pub levels: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            seed: 0,
            patch: 7,
            epsilon: 1e-3,
            uniform: false,
            normalize: true,
            levels: 2,
        }
    }
}

#[wasm_bindgen]
pub struct SceneView {
    side: usize,
    radmi: Vec<f32>,
    reference: Vec<f32>,
    band: Vec<u8>,
    band_ratio: f64,
    spearman: f64,
    pearson: f64,
}

#[wasm_bindgen]
impl SceneView {
    pub fn side(&self) -> usize {
        self.side
    }

    /// RADMI map rescaled to `[0, 1]`, row-major.
    pub fn radmi(&self) -> Vec<f32> {
        self.radmi.clone()
    }

    pub fn reference(&self) -> Vec<f32> {
        self.reference.clone()
    }

    /// 1 inside the boundary band.
    pub fn band(&self) -> Vec<u8> {
        self.band.clone()
    }

    /// Mean RADMI in the band over the mean outside it.
    pub fn band_ratio(&self) -> f64 {
        self.band_ratio
    }

    pub fn spearman(&self) -> f64 {
        self.spearman
    }

    pub fn pearson(&self) -> f64 {
        self.pearson
    }
}

fn to_f32(g: &Grid) -> Vec<f32> {
    g.as_slice().iter().map(|&v| v as f32).collect()
}

pub fn run_scene(p: &SceneParams) -> Result<SceneView, String> {
    let spec = SyntheticSpec {
        hw: (SCENE_SIDE, SCENE_SIDE),
        ..SyntheticSpec::boundary_scene(p.seed)
    };
    let scene = gen_boundary_pyramid(&spec, p.levels).map_err(|e| e.to_string())?;
    let feats = scene
        .features
        .iter()
        .map(FeatureMap::from_tensor)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let mi = MiConfig {
        patch: p.patch,
        epsilon: p.epsilon,
        ..MiConfig::default()
    };
    let agg = AggregationConfig {
        weighting: if p.uniform { Weighting::Uniform } else { Weighting::Resolution },
        normalize_per_pair: p.normalize,
        output_hw: None,
    };
    let map = radmi_features(&feats, spec.hw, &mi, &agg).map_err(|e| e.to_string())?;

    let n = SCENE_SIDE * SCENE_SIDE;
    let band: Vec<u8> = (0..n)
        .map(|i| scene.band_mask.get(i / SCENE_SIDE, i % SCENE_SIDE) as u8)
        .collect();
    let (mut inside, mut ni, mut outside, mut no) = (0.0, 0usize, 0.0, 0usize);
    for (v, &b) in map.values.as_slice().iter().zip(&band) {
        if b == 1 {
            inside += v;
            ni += 1;
        } else {
            outside += v;
            no += 1;
        }
    }
    let band_ratio = (inside / ni as f64) / (outside / no as f64);
    let cfg = MetricConfig::default();
    // a constant map has no correlation; show it as NaN
    let corr = |m: Metric| m.evaluate(&map.values, &scene.reference.values, &cfg).unwrap_or(f64::NAN);
    Ok(SceneView {
        side: SCENE_SIDE,
        radmi: to_f32(&map.values.min_max_normalized()),
        reference: to_f32(&scene.reference.values),
        band,
        band_ratio,
        spearman: corr(Metric::Spearman),
        pearson: corr(Metric::Pearson),
    })
}

/// `(estimated mean MI, analytic MI)` for a correlated field.
pub fn field_mi(rho: f64, channels: usize, patch: usize, seed: u64) -> Result<(f64, f64), String> {
    let spec = SyntheticSpec::correlated_field((FIELD_SIDE, FIELD_SIDE), channels, rho, seed);
    let f = gen_correlated_field(&spec).map_err(|e| e.to_string())?;
    let cfg = MiConfig {
        patch,
        epsilon: 0.0,
        ..MiConfig::default()
    };
    let m = windowed_mi_map(&f.feat_a, &f.feat_b, &cfg, WindowMode::Fast).map_err(|e| e.to_string())?;
    Ok((m.values.mean(), f.true_mi))
}

#[wasm_bindgen]
pub fn scene(
    seed: u32,
    patch: usize,
    epsilon: f64,
    uniform: bool,
    normalize: bool,
    levels: usize,
) -> Result<SceneView, JsError> {
    run_scene(&SceneParams {
        seed: seed as u64,
        patch,
        epsilon,
        uniform,
        normalize,
        levels,
    })
    .map_err(|e| JsError::new(&e))
}

/// `[estimated, analytic]` mean MI in nats.
#[wasm_bindgen]
pub fn correlated_field_mi(rho: f64, channels: usize, patch: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    field_mi(rho, channels, patch, seed as u64)
        .map(|(est, truth)| vec![est, truth])
        .map_err(|e| JsError::new(&e))
}
