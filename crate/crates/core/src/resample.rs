//! Corner-aligned resampling: bilinear for aligning decoder features,
//! Catmull-Rom bicubic for upsampling MI maps.
//!
//! Target sample `i` of `n_dst` maps to source coordinate
//! `i * (n_src - 1) / (n_dst - 1)`; a single-sample target reads the source
//! centre. Both kernels are written as a reference value plus weighted
//! differences so constant inputs come back bit-exact.

use crate::error::{Error, Result};
use crate::grid::{FeatureMap, Grid};

/// Catmull-Rom sharpness.
const CUBIC_A: f64 = -0.5;

#[inline]
fn source_coord(i: usize, n_src: usize, n_dst: usize) -> f64 {
    if n_dst == 1 {
        (n_src - 1) as f64 / 2.0
    } else {
        i as f64 * (n_src - 1) as f64 / (n_dst - 1) as f64
    }
}

/// Per-channel bilinear resampling of `fine` down to `coarse_hw`.
pub fn align_bilinear(fine: &FeatureMap, coarse_hw: (usize, usize)) -> Result<FeatureMap> {
    let (hf, wf) = fine.hw();
    let (hc, wc) = coarse_hw;
    if hc == 0 || wc == 0 || hc > hf || wc > wf {
        return Err(Error::ShapeMismatch(format!(
            "cannot align {hf}x{wf} features to {hc}x{wc}"
        )));
    }
    if (hc, wc) == (hf, wf) {
        return Ok(fine.clone());
    }
    let taps = |n_dst: usize, n_src: usize| -> Vec<(usize, usize, f64)> {
        (0..n_dst)
            .map(|i| {
                let s = source_coord(i, n_src, n_dst);
                let i0 = (s.floor() as usize).min(n_src - 1);
                let i1 = (i0 + 1).min(n_src - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let ys = taps(hc, hf);
    let xs = taps(wc, wf);
    let mut out = Vec::with_capacity(fine.channels() * hc * wc);
    for c in 0..fine.channels() {
        for &(y0, y1, ty) in &ys {
            for &(x0, x1, tx) in &xs {
                let top = lerp(fine.get(c, y0, x0), fine.get(c, y0, x1), tx);
                let bottom = lerp(fine.get(c, y1, x0), fine.get(c, y1, x1), tx);
                out.push(lerp(top, bottom, ty));
            }
        }
    }
    FeatureMap::new(fine.channels(), hc, wc, out)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + t * (b - a)
    }
}

/// Bicubic kernel weight at distance `x`.
fn cubic(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((CUBIC_A + 2.0) * x - (CUBIC_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((CUBIC_A * x - 5.0 * CUBIC_A) * x + 8.0 * CUBIC_A) * x - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

/// Edge-clamped tap indices and weights for each target sample.
fn cubic_taps(n_src: usize, n_dst: usize) -> Vec<([usize; 4], [f64; 4])> {
    (0..n_dst)
        .map(|i| {
            let s = source_coord(i, n_src, n_dst);
            let base = s.floor();
            let t = s - base;
            let base = base as isize;
            let mut idx = [0usize; 4];
            let mut wts = [0.0f64; 4];
            for k in 0..4 {
                let off = k as isize - 1;
                idx[k] = (base + off).clamp(0, n_src as isize - 1) as usize;
                wts[k] = cubic(t - off as f64);
            }
            (idx, wts)
        })
        .collect()
}

#[inline]
fn cubic_combine(vals: [f64; 4], wts: [f64; 4]) -> f64 {
    // reference tap is the one nearest the sample position
    let r = vals[1];
    r + wts
        .iter()
        .zip(vals)
        .map(|(w, v)| w * (v - r))
        .sum::<f64>()
}

/// Catmull-Rom bicubic upsampling of a map to `target_hw`.
pub fn upsample_bicubic(map: &Grid, target_hw: (usize, usize)) -> Result<Grid> {
    let (h, w) = map.hw();
    let (th, tw) = target_hw;
    if th < h || tw < w {
        return Err(Error::ShapeMismatch(format!(
            "bicubic upsampling cannot shrink {h}x{w} to {th}x{tw}"
        )));
    }
    if (th, tw) == (h, w) {
        return Ok(map.clone());
    }
    let xs = cubic_taps(w, tw);
    let ys = cubic_taps(h, th);

    let mut horizontal = vec![0.0; h * tw];
    for y in 0..h {
        for (x, (idx, wts)) in xs.iter().enumerate() {
            let vals = idx.map(|i| map.get(y, i));
            horizontal[y * tw + x] = cubic_combine(vals, *wts);
        }
    }
    let mut out = vec![0.0; th * tw];
    for (y, (idx, wts)) in ys.iter().enumerate() {
        for x in 0..tw {
            let vals = idx.map(|i| horizontal[i * tw + x]);
            out[y * tw + x] = cubic_combine(vals, *wts);
        }
    }
    Grid::new(th, tw, out)
}
