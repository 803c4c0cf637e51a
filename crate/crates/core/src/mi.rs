//! Gaussian mutual information between two feature maps.
//!
//! Around every output pixel a `p x p` window of both (already aligned)
//! feature maps is read. The `p²` positions are treated as samples of the
//! concatenated channel vector `[a; b]`; its empirical covariance is
//! shrunk towards a scaled identity and the Gaussian MI
//! `½ (ln|Σ_a| + ln|Σ_b| - ln|Σ|)` is evaluated with `Σ_a`, `Σ_b` taken as
//! the diagonal blocks of the same regularized joint. Taking the marginals
//! from the joint keeps the estimate nonnegative (Fischer's inequality).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FeatureMap, Grid};
use crate::io::Tensor;
use crate::linalg::{cholesky, log_det_from_factor, Matrix};

/// Round-off slack below zero that is clamped to exactly zero.
const NEGATIVE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub mean: Vec<f64>,
    pub cov: Matrix,
    pub sample_count: usize,
}

/// Mean and unbiased (`1/(n-1)`) covariance of `n` samples of dimension
/// `dim`, stored row-major in `samples`.
pub fn empirical_covariance(samples: &[f64], dim: usize) -> Result<CovarianceEstimate> {
    if dim == 0 || !samples.len().is_multiple_of(dim) {
        return Err(Error::ShapeMismatch(format!(
            "{} values do not form rows of length {dim}",
            samples.len()
        )));
    }
    let n = samples.len() / dim;
    if n < 2 {
        return Err(Error::DegenerateInput(format!(
            "covariance needs at least 2 samples, got {n}"
        )));
    }
    let mut mean = vec![0.0; dim];
    for row in samples.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = Matrix::zeros(dim);
    let mut centered = vec![0.0; dim];
    for row in samples.chunks_exact(dim) {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = v - m;
        }
        for i in 0..dim {
            for j in 0..=i {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..dim {
        for j in 0..=i {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(CovarianceEstimate {
        mean,
        cov,
        sample_count: n,
    })
}

/// Trace-scaled shrinkage `Σ + ε (tr Σ / D) I`; `Σ + ε I` when the trace
/// is zero.
pub fn regularize(cov: &Matrix, epsilon: f64) -> Matrix {
    let mut out = cov.clone();
    regularize_in_place(&mut out, epsilon);
    out
}

fn regularize_in_place(cov: &mut Matrix, epsilon: f64) {
    if epsilon == 0.0 {
        return;
    }
    let d = cov.dim();
    let trace = cov.trace();
    let shift = if trace == 0.0 {
        epsilon
    } else {
        epsilon * trace / d as f64
    };
    for i in 0..d {
        cov[(i, i)] += shift;
    }
}

/// Closed-form Gaussian mutual information in nats.
///
/// `joint` is the covariance of `[a; b]` with `a` occupying the first
/// `dim_a` coordinates. The leading block's log-determinant is read off the
/// joint Cholesky factor, whose trailing diagonal carries the Schur
/// complement `Σ_b - Σ_ab^T Σ_a^{-1} Σ_ab`; only `Σ_b` needs a second
/// factorization.
pub fn gaussian_mi(joint: &Matrix, dim_a: usize) -> Result<f64> {
    let d = joint.dim();
    if dim_a == 0 || dim_a >= d {
        return Err(Error::ShapeMismatch(format!(
            "block split {dim_a} does not divide a {d}x{d} joint covariance"
        )));
    }
    let l = cholesky(joint)?;
    let ld_schur = log_det_from_factor(&l, dim_a, d);
    let lb = cholesky(&joint.block(dim_a, d - dim_a))?;
    let ld_b = log_det_from_factor(&lb, 0, d - dim_a);
    let mi = 0.5 * (ld_b - ld_schur);
    Ok(if (-NEGATIVE_SLACK..0.0).contains(&mi) { 0.0 } else { mi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    /// Recompute every window's covariance from its samples.
    Naive,
    /// Summed-area tables of channel sums and channel-pair products.
    Fast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiConfig {
    /// Odd window side `p >= 3`.
    pub patch: usize,
    pub stride: usize,
    /// Shrinkage strength for [`regularize`].
    pub epsilon: f64,
    /// Project each layer to this many channels with a seeded Gaussian
    /// matrix before estimating. Layers already this narrow are untouched.
    pub projection_dim: Option<usize>,
    pub projection_seed: u64,
}

impl Default for MiConfig {
    fn default() -> Self {
        Self {
            patch: 7,
            stride: 1,
            epsilon: 1e-3,
            projection_dim: None,
            projection_seed: 0,
        }
    }
}

impl MiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch < 3 || self.patch.is_multiple_of(2) {
            return Err(Error::InvalidPatch {
                patch: self.patch,
                reason: "window side must be odd and at least 3".into(),
            });
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!(
                "epsilon must be finite and nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.projection_dim == Some(0) {
            return Err(Error::Config("projection_dim must be at least 1".into()));
        }
        Ok(())
    }
}

/// Dense MI map for one pair of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MiMap {
    /// Nats, one value per window position.
    pub values: Grid,
    /// Resolution of the layer pair the windows were taken from.
    pub resolution: (usize, usize),
}

/// Windowed MI map between two tensors of shape `C x H x W` that share `H x W`.
pub fn windowed_mi_map(
    feat_a: &Tensor,
    feat_b: &Tensor,
    cfg: &MiConfig,
    mode: WindowMode,
) -> Result<MiMap> {
    windowed_mi_map_features(
        &FeatureMap::from_tensor(feat_a)?,
        &FeatureMap::from_tensor(feat_b)?,
        cfg,
        mode,
    )
}

pub fn windowed_mi_map_features(
    feat_a: &FeatureMap,
    feat_b: &FeatureMap,
    cfg: &MiConfig,
    mode: WindowMode,
) -> Result<MiMap> {
    cfg.validate()?;
    let (h, w) = feat_a.hw();
    if feat_b.hw() != (h, w) {
        let (hb, wb) = feat_b.hw();
        return Err(Error::ShapeMismatch(format!(
            "feature maps must share spatial size, got {h}x{w} and {hb}x{wb}"
        )));
    }
    if cfg.patch > h.min(w) {
        return Err(Error::InvalidPatch {
            patch: cfg.patch,
            reason: format!("window exceeds the {h}x{w} feature map"),
        });
    }

    let (a, b) = match cfg.projection_dim {
        Some(k) => (
            project(feat_a, k, cfg.projection_seed, 0),
            project(feat_b, k, cfg.projection_seed, 1),
        ),
        None => (feat_a.clone(), feat_b.clone()),
    };
    let field = PaddedField::new(&a, &b, cfg.patch / 2);
    let out_h = h.div_ceil(cfg.stride);
    let out_w = w.div_ceil(cfg.stride);

    let rows: Vec<Result<Vec<f64>>> = match mode {
        WindowMode::Naive => crate::map_indexed(out_h, |oy| {
            let mut scratch = Vec::with_capacity(cfg.patch * cfg.patch * field.dim);
            (0..out_w)
                .map(|ox| field.naive_window(oy * cfg.stride, ox * cfg.stride, cfg, &mut scratch))
                .collect()
        }),
        WindowMode::Fast => {
            let tables = WindowSums::new(&field);
            crate::map_indexed(out_h, |oy| {
                (0..out_w)
                    .map(|ox| tables.window_mi(oy * cfg.stride, ox * cfg.stride, cfg))
                    .collect()
            })
        }
    };
    let mut values = Vec::with_capacity(out_h * out_w);
    for row in rows {
        values.extend(row?);
    }
    Ok(MiMap {
        values: Grid::new(out_h, out_w, values)?,
        resolution: (h, w),
    })
}

/// Seeded Gaussian random projection `R x` with `R` of size `k x C` scaled
/// by `1/sqrt(k)`.
fn project(feat: &FeatureMap, k: usize, seed: u64, stream: u64) -> FeatureMap {
    let c = feat.channels();
    if k >= c {
        return feat.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let scale = 1.0 / (k as f64).sqrt();
    let r: Vec<f64> = (0..k * c)
        .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    let (h, w) = feat.hw();
    let n = h * w;
    let mut out = vec![0.0; k * n];
    for i in 0..k {
        let dst = &mut out[i * n..(i + 1) * n];
        for j in 0..c {
            let coef = r[i * c + j];
            for (d, s) in dst.iter_mut().zip(feat.channel(j)) {
                *d += coef * s;
            }
        }
    }
    FeatureMap::new(k, h, w, out).expect("consistent shape")
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let j = if i < 0 { -i } else if i >= n { 2 * (n - 1) - i } else { i };
    j as usize
}

/// Both layers reflect-padded by `radius` and interleaved pixel-major as
/// `[a_0 .. a_{Ca-1}, b_0 .. b_{Cb-1}]`.
struct PaddedField {
    dim: usize,
    dim_a: usize,
    hp: usize,
    wp: usize,
    data: Vec<f64>,
}

impl PaddedField {
    fn new(a: &FeatureMap, b: &FeatureMap, radius: usize) -> Self {
        let (h, w) = a.hw();
        let (ca, cb) = (a.channels(), b.channels());
        let dim = ca + cb;
        let hp = h + 2 * radius;
        let wp = w + 2 * radius;
        let mut data = Vec::with_capacity(hp * wp * dim);
        for py in 0..hp {
            let y = reflect(py as isize - radius as isize, h);
            for px in 0..wp {
                let x = reflect(px as isize - radius as isize, w);
                data.extend((0..ca).map(|c| a.get(c, y, x)));
                data.extend((0..cb).map(|c| b.get(c, y, x)));
            }
        }
        Self {
            dim,
            dim_a: ca,
            hp,
            wp,
            data,
        }
    }

    #[inline]
    fn pixel(&self, y: usize, x: usize) -> &[f64] {
        let i = (y * self.wp + x) * self.dim;
        &self.data[i..i + self.dim]
    }

    /// Window whose top-left padded corner is `(y, x)`, i.e. centred on
    /// unpadded pixel `(y, x)`.
    fn naive_window(&self, y: usize, x: usize, cfg: &MiConfig, scratch: &mut Vec<f64>) -> Result<f64> {
        scratch.clear();
        for dy in 0..cfg.patch {
            for dx in 0..cfg.patch {
                scratch.extend_from_slice(self.pixel(y + dy, x + dx));
            }
        }
        let est = empirical_covariance(scratch, self.dim)?;
        let mut joint = est.cov;
        regularize_in_place(&mut joint, cfg.epsilon);
        gaussian_mi(&joint, self.dim_a)
    }
}

/// Summed-area tables over the padded field: one per channel and one per
/// channel pair `(i, j)`, `j <= i`, interleaved per table position so that a
/// window lookup reads four contiguous runs.
struct WindowSums {
    dim: usize,
    dim_a: usize,
    stride: usize,
    width: usize,
    data: Vec<f64>,
}

impl WindowSums {
    fn new(field: &PaddedField) -> Self {
        let dim = field.dim;
        let pairs = dim * (dim + 1) / 2;
        let stride = dim + pairs;
        let width = field.wp + 1;

        // Covariance is shift invariant; removing the global mean keeps the
        // prefix sums small and limits cancellation.
        let npix = (field.hp * field.wp) as f64;
        let mut offset = vec![0.0; dim];
        for px in field.data.chunks_exact(dim) {
            for (o, v) in offset.iter_mut().zip(px) {
                *o += v;
            }
        }
        offset.iter_mut().for_each(|o| *o /= npix);

        let mut data = vec![0.0; (field.hp + 1) * width * stride];
        let mut cell = vec![0.0; stride];
        let mut centered = vec![0.0; dim];
        for y in 0..field.hp {
            let mut row_acc = vec![0.0; stride];
            for x in 0..field.wp {
                for ((c, v), o) in centered.iter_mut().zip(field.pixel(y, x)).zip(&offset) {
                    *c = v - o;
                }
                cell[..dim].copy_from_slice(&centered);
                let mut k = dim;
                for i in 0..dim {
                    for j in 0..=i {
                        cell[k] = centered[i] * centered[j];
                        k += 1;
                    }
                }
                let above = (y * width + x + 1) * stride;
                let here = ((y + 1) * width + x + 1) * stride;
                for t in 0..stride {
                    row_acc[t] += cell[t];
                    data[here + t] = data[above + t] + row_acc[t];
                }
            }
        }
        Self {
            dim,
            dim_a: field.dim_a,
            stride,
            width,
            data,
        }
    }

    fn window_mi(&self, y: usize, x: usize, cfg: &MiConfig) -> Result<f64> {
        let p = cfg.patch;
        let n = (p * p) as f64;
        let at = |yy: usize, xx: usize| (yy * self.width + xx) * self.stride;
        let (a, b, c, d) = (at(y, x), at(y, x + p), at(y + p, x), at(y + p, x + p));
        let sum = |t: usize| self.data[d + t] - self.data[b + t] - self.data[c + t] + self.data[a + t];

        let dim = self.dim;
        let s: Vec<f64> = (0..dim).map(sum).collect();
        let mut joint = Matrix::zeros(dim);
        let mut k = dim;
        for i in 0..dim {
            for j in 0..=i {
                let v = (sum(k) - s[i] * s[j] / n) / (n - 1.0);
                joint[(i, j)] = v;
                joint[(j, i)] = v;
                k += 1;
            }
        }
        regularize_in_place(&mut joint, cfg.epsilon);
        gaussian_mi(&joint, self.dim_a)
    }
}
