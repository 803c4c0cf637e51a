//! Seeded synthetic inputs with known structure.
//!
//! Random draws come from ChaCha8 streams keyed by `(purpose, pixel)`, so
//! every pixel's values depend only on the seed and its own index and the
//! output is identical however the work is split.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FeatureMap, Grid};
use crate::io::{SectionDataset, Tensor};
use crate::metrics::{distance_to_mask, Mask};
use crate::pipeline::UncertaintyMap;
use crate::resample::align_bilinear;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    CorrelatedField,
    BoundaryScene,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    /// Output (finest) resolution.
    pub hw: (usize, usize),
    pub channels: usize,
    /// Per-channel correlation of the correlated field.
    pub rho: f64,
    /// Half-width of the boundary band, in pixels.
    pub band_width: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn correlated_field(hw: (usize, usize), channels: usize, rho: f64, seed: u64) -> Self {
        Self {
            kind: SyntheticKind::CorrelatedField,
            hw,
            channels,
            rho,
            band_width: 1,
            seed,
        }
    }

    /// The scene used by the boundary acceptance check.
    pub fn boundary_scene(seed: u64) -> Self {
        Self {
            kind: SyntheticKind::BoundaryScene,
            hw: (96, 96),
            channels: 4,
            rho: 0.0,
            band_width: 2,
            seed,
        }
    }
}

// stream purposes
const FIELD: u64 = 1;
const FINE_NOISE: u64 = 2;
const COARSE_NOISE: u64 = 3;
const BAND_MIX: u64 = 4;
const LOGITS: u64 = 5;

fn pixel_rng(seed: u64, purpose: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 48) ^ index as u64);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub struct CorrelatedField {
    pub feat_a: Tensor,
    pub feat_b: Tensor,
    /// `-(C/2) ln(1 - ρ²)` nats.
    pub true_mi: f64,
}

/// Analytic MI of `C` independent channel pairs with correlation `rho`.
pub fn correlated_mi(rho: f64, channels: usize) -> f64 {
    -(channels as f64) / 2.0 * (1.0 - rho * rho).ln()
}

/// Independent standard bivariate Gaussian pairs with correlation `rho`
/// at every pixel and channel.
pub fn gen_correlated_field(spec: &SyntheticSpec) -> Result<CorrelatedField> {
    if spec.kind != SyntheticKind::CorrelatedField {
        return Err(Error::Config("spec is not a correlated field".into()));
    }
    if !(spec.rho.abs() < 1.0) {
        return Err(Error::DegenerateInput(format!("|rho| must be < 1, got {}", spec.rho)));
    }
    let (h, w) = spec.hw;
    let c = spec.channels;
    if h == 0 || w == 0 || c == 0 {
        return Err(Error::DegenerateInput("empty field".into()));
    }
    let n = h * w;
    let scale = (1.0 - spec.rho * spec.rho).sqrt();
    let mut a = vec![0.0f32; c * n];
    let mut b = vec![0.0f32; c * n];
    for i in 0..n {
        let mut rng = pixel_rng(spec.seed, FIELD, i);
        for ch in 0..c {
            let z1 = normal(&mut rng);
            let z2 = normal(&mut rng);
            a[ch * n + i] = z1 as f32;
            b[ch * n + i] = (spec.rho * z1 + scale * z2) as f32;
        }
    }
    Ok(CorrelatedField {
        feat_a: Tensor::from_f32(vec![c, h, w], a)?,
        feat_b: Tensor::from_f32(vec![c, h, w], b)?,
        true_mi: correlated_mi(spec.rho, c),
    })
}

pub struct BoundaryScene {
    /// Decoder activations ordered coarse to fine.
    pub features: Vec<Tensor>,
    /// Pixels within `band_width` of the other region.
    pub band_mask: Mask,
    /// Broad decay with distance to the region boundary.
    pub reference: UncertaintyMap,
    /// 0 outside the disk region, 1 inside.
    pub labels: Vec<i32>,
    /// Distance from each pixel centre to the region boundary.
    pub boundary_distance: Grid,
}

// scene constants
const MEAN_GAP: f64 = 2.0;
const FINE_SIGMA: f64 = 0.3;
const COARSE_SIGMA: f64 = 1.0;

/// Disk region labels for an `h x w` image.
fn disk_labels(h: usize, w: usize) -> Vec<i32> {
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let r = h.min(w) as f64 / 3.0;
    (0..h * w)
        .map(|i| {
            let (y, x) = ((i / w) as f64, (i % w) as f64);
            ((y - cy).powi(2) + (x - cx).powi(2) < r * r) as i32
        })
        .collect()
}

/// Two regions with distinct channel means, mixed inside a band around
/// their boundary; the coarse layer is a downsample of the fine one plus
/// independent noise.
pub fn gen_boundary_scene(spec: &SyntheticSpec) -> Result<BoundaryScene> {
    gen_boundary_pyramid(spec, 2)
}

/// Boundary scene with `levels` decoder layers, each coarser layer the
/// half-resolution downsample of the next finer one plus fresh noise.
pub fn gen_boundary_pyramid(spec: &SyntheticSpec, levels: usize) -> Result<BoundaryScene> {
    if levels < 2 {
        return Err(Error::Config(format!("need at least 2 levels, got {levels}")));
    }
    if spec.kind != SyntheticKind::BoundaryScene {
        return Err(Error::Config("spec is not a boundary scene".into()));
    }
    let (h, w) = spec.hw;
    let c = spec.channels;
    if h < 4 || w < 4 || c == 0 {
        return Err(Error::DegenerateInput(format!("scene {h}x{w} with {c} channels is too small")));
    }
    if spec.band_width == 0 || 2 * spec.band_width >= h.min(w) / 3 {
        return Err(Error::DegenerateInput(format!(
            "band width {} does not fit a {h}x{w} scene",
            spec.band_width
        )));
    }
    let labels = disk_labels(h, w);
    let inside = Mask::new(h, w, labels.iter().map(|&l| l == 1).collect())?;
    let outside = Mask::new(h, w, labels.iter().map(|&l| l == 0).collect())?;
    let to_inside = distance_to_mask(&inside);
    let to_outside = distance_to_mask(&outside);
    // distance to the nearest pixel of the other region
    let other = Grid::from_fn(h, w, |y, x| {
        if labels[y * w + x] == 1 {
            to_outside.get(y, x)
        } else {
            to_inside.get(y, x)
        }
    });
    let band = spec.band_width as f64;
    let band_mask = Mask::new(h, w, other.as_slice().iter().map(|&d| d <= band).collect())?;
    let boundary_distance = other.map(|d| (d - 0.5).max(0.0));
    let spread = 2.0 * band + 4.0;
    let reference = UncertaintyMap::new(
        boundary_distance.map(|d| (-(d * d) / (2.0 * spread * spread)).exp()),
        "reference",
    );

    let n = h * w;
    let mut fine = vec![0.0f64; c * n];
    for i in 0..n {
        let region = if band_mask.get(i / w, i % w) {
            let mut mix = pixel_rng(spec.seed, BAND_MIX, i);
            (rand::Rng::random::<f64>(&mut mix) < 0.5) as i32
        } else {
            labels[i]
        };
        let mut rng = pixel_rng(spec.seed, FINE_NOISE, i);
        for ch in 0..c {
            let sign = if ch % 2 == 0 { 1.0 } else { -1.0 };
            let mean = sign * MEAN_GAP * (region as f64 - 0.5);
            fine[ch * n + i] = mean + FINE_SIGMA * normal(&mut rng);
        }
    }
    let fine = FeatureMap::new(c, h, w, fine)?;
    let mut layers = vec![fine];
    for depth in 1..levels {
        let finer = layers.last().expect("nonempty");
        let (hf, wf) = finer.hw();
        let (hc, wc) = (hf.div_ceil(2), wf.div_ceil(2));
        if hc < 2 || wc < 2 {
            return Err(Error::DegenerateInput(format!("{levels} levels do not fit a {h}x{w} scene")));
        }
        let down = align_bilinear(finer, (hc, wc))?;
        let nc = hc * wc;
        let mut coarse = down.as_slice().to_vec();
        let purpose = COARSE_NOISE + 16 * (depth as u64 - 1);
        for i in 0..nc {
            let mut rng = pixel_rng(spec.seed, purpose, i);
            for ch in 0..c {
                coarse[ch * nc + i] += COARSE_SIGMA * normal(&mut rng);
            }
        }
        layers.push(FeatureMap::new(c, hc, wc, coarse)?);
    }
    layers.reverse();

    Ok(BoundaryScene {
        features: layers.iter().map(FeatureMap::to_tensor).collect(),
        band_mask,
        reference,
        labels,
        boundary_distance,
    })
}

/// Shape of the bundled miniature dataset.
pub const MINI_SECTIONS: usize = 3;
pub const MINI_HW: (usize, usize) = (32, 32);
pub const MINI_CHANNELS: usize = 4;
pub const MINI_CLASSES: usize = 4;
pub const MINI_MEMBERS: usize = 3;
pub const MINI_PASSES: usize = 4;
pub const MINI_EPOCHS: usize = 5;

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Class logits for one pixel: the two region classes follow the signed
/// boundary distance, the remaining classes sit low.
fn logits(signed_dist: f64, classes: usize, noise: &mut impl FnMut() -> f64, noise_scale: f64) -> Vec<f64> {
    (0..classes)
        .map(|k| {
            let base = match k {
                0 => -1.2 * signed_dist,
                1 => 1.2 * signed_dist,
                _ => -1.5,
            };
            base + noise_scale * noise()
        })
        .collect()
}

/// One section of the miniature dataset: a boundary scene plus
/// network-like outputs (softmax, ensemble members, dropout passes and
/// per-epoch predictions) derived from its region geometry.
pub fn mini_section(id: &str, seed: u64) -> Result<SectionDataset> {
    let spec = SyntheticSpec {
        kind: SyntheticKind::BoundaryScene,
        hw: MINI_HW,
        channels: MINI_CHANNELS,
        rho: 0.0,
        band_width: 1,
        seed,
    };
    let scene = gen_boundary_scene(&spec)?;
    let (h, w) = MINI_HW;
    let n = h * w;
    let k = MINI_CLASSES;
    let signed: Vec<f64> = (0..n)
        .map(|i| {
            let d = scene.boundary_distance.as_slice()[i] + 0.5;
            if scene.labels[i] == 1 { d } else { -d }
        })
        .collect();

    // draw `count` probability maps; stream offset keeps them independent
    let prob_maps = |count: usize, stream: usize, noise_scale: f64| -> Vec<f32> {
        let mut out = vec![0.0f32; count * k * n];
        for m in 0..count {
            for i in 0..n {
                let mut rng = pixel_rng(seed, LOGITS, (stream + m) * n + i);
                let mut noise = || normal(&mut rng);
                let p = softmax(&logits(signed[i], k, &mut noise, noise_scale));
                for (cls, v) in p.into_iter().enumerate() {
                    out[((m * k) + cls) * n + i] = v as f32;
                }
            }
        }
        out
    };

    let probs = prob_maps(1, 0, 0.3);
    let ensemble = prob_maps(MINI_MEMBERS, 1, 0.8);
    let dropout = prob_maps(MINI_PASSES, 1 + MINI_MEMBERS, 0.5);
    let mut preds = vec![0i32; MINI_EPOCHS * n];
    for e in 0..MINI_EPOCHS {
        // predictions settle as training proceeds
        let scale = 1.5 / (e + 1) as f64;
        for i in 0..n {
            let mut rng = pixel_rng(seed, LOGITS, (1 + MINI_MEMBERS + MINI_PASSES + e) * n + i);
            let mut noise = || normal(&mut rng);
            let l = logits(signed[i], k, &mut noise, scale);
            let best = (0..k).fold(0, |b, j| if l[j] > l[b] { j } else { b });
            preds[e * n + i] = best as i32;
        }
    }

    Ok(SectionDataset {
        section_id: id.to_string(),
        decoder_features: scene.features,
        probs: Some(Tensor::from_f32(vec![k, h, w], probs)?),
        ensemble_probs: Some(Tensor::from_f32(vec![MINI_MEMBERS, k, h, w], ensemble)?),
        dropout_probs: Some(Tensor::from_f32(vec![MINI_PASSES, k, h, w], dropout)?),
        epoch_preds: Some(Tensor::from_i32(vec![MINI_EPOCHS, h, w], preds)?),
        labels: Some(Tensor::from_i32(vec![h, w], scene.labels)?),
    })
}

/// The miniature dataset: `MINI_SECTIONS` sections with consecutive seeds.
pub fn mini_dataset(seed: u64) -> Result<Vec<SectionDataset>> {
    (0..MINI_SECTIONS)
        .map(|s| mini_section(&format!("section_{s:03}"), seed.wrapping_add(s as u64)))
        .collect()
}
