use crate::error::{Error, Result};
use crate::grid::Grid;

use super::MetricConfig;

/// Binary pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    h: usize,
    w: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(h: usize, w: usize, bits: Vec<bool>) -> Result<Self> {
        if h == 0 || w == 0 || bits.len() != h * w {
            return Err(Error::ShapeMismatch(format!(
                "{h}x{w} mask with {} entries",
                bits.len()
            )));
        }
        Ok(Self { h, w, bits })
    }

    pub fn from_points(h: usize, w: usize, points: &[(usize, usize)]) -> Result<Self> {
        let mut bits = vec![false; h * w];
        for &(y, x) in points {
            if y >= h || x >= w {
                return Err(Error::ShapeMismatch(format!("point ({y}, {x}) outside {h}x{w}")));
            }
            bits[y * w + x] = true;
        }
        Self::new(h, w, bits)
    }

    pub fn hw(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.w + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / self.w, i % self.w))
    }

    /// `{v >= percentile(q)} ∩ {v > 0}` of a map normalized to `[0, 1]`.
    pub fn high_values(normalized: &Grid, q: f64) -> Mask {
        let thr = percentile(normalized.as_slice(), q);
        let (h, w) = normalized.hw();
        Mask {
            h,
            w,
            bits: normalized.as_slice().iter().map(|&v| v >= thr && v > 0.0).collect(),
        }
    }
}

/// Percentile `q` in `[0, 100]` with linear interpolation between order
/// statistics.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + t * (sorted[hi] - sorted[lo])
    }
}

/// One-dimensional squared distance transform of a sampled function
/// (lower envelope of parabolas).
fn sq_dt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let intersect = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
    };
    for q in 1..n {
        let mut s = intersect(q, v[k]);
        // z[0] = -inf stops the walk at k = 0
        while s <= z[k] {
            k -= 1;
            s = intersect(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance from every pixel to the nearest mask pixel.
pub fn distance_to_mask(mask: &Mask) -> Grid {
    // finite stand-in for +inf keeps the parabola intersections well defined
    const FAR: f64 = 1e20;
    let (h, w) = mask.hw();
    let n = h.max(w);
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut col_in = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    let mut sq = vec![0.0; h * w];
    for x in 0..w {
        for (y, c) in col_in.iter_mut().enumerate() {
            *c = if mask.get(y, x) { 0.0 } else { FAR };
        }
        sq_dt_1d(&col_in, &mut col_out, &mut v, &mut z);
        for (y, &c) in col_out.iter().enumerate() {
            sq[y * w + x] = c;
        }
    }
    let mut row_out = vec![0.0; w];
    for y in 0..h {
        sq_dt_1d(&sq[y * w..(y + 1) * w], &mut row_out, &mut v, &mut z);
        sq[y * w..(y + 1) * w].copy_from_slice(&row_out);
    }
    Grid::new(h, w, sq.into_iter().map(f64::sqrt).collect()).expect("shape")
}

/// Symmetric chamfer distance `½ (mean_{a∈A} d(a, B) + mean_{b∈B} d(b, A))`.
pub fn chamfer_masks(a: &Mask, b: &Mask) -> Result<f64> {
    if a.hw() != b.hw() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.hw(), b.hw())));
    }
    let (na, nb) = (a.count(), b.count());
    if na == 0 || nb == 0 {
        return Err(Error::DegenerateInput("chamfer distance needs two non-empty masks".into()));
    }
    let da = distance_to_mask(a);
    let db = distance_to_mask(b);
    let a_to_b: f64 = a.points().map(|(y, x)| db.get(y, x)).sum::<f64>() / na as f64;
    let b_to_a: f64 = b.points().map(|(y, x)| da.get(y, x)).sum::<f64>() / nb as f64;
    Ok(0.5 * (a_to_b + b_to_a))
}

/// Chamfer distance between the high-value regions of two maps.
pub fn chamfer(a: &Grid, b: &Grid, cfg: &MetricConfig) -> Result<f64> {
    let (a, b) = super::normalized_pair(a, b)?;
    chamfer_masks(
        &Mask::high_values(&a, cfg.chamfer_percentile),
        &Mask::high_values(&b, cfg.chamfer_percentile),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        let a = Mask::from_points(6, 6, &[(0, 0)]).unwrap();
        let b = Mask::from_points(6, 6, &[(3, 4)]).unwrap();
        assert_eq!(chamfer_masks(&a, &b).unwrap(), 5.0);
        assert_eq!(chamfer_masks(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn empty_mask_is_degenerate() {
        let a = Mask::from_points(3, 3, &[(1, 1)]).unwrap();
        let e = Mask::from_points(3, 3, &[]).unwrap();
        assert!(matches!(chamfer_masks(&a, &e), Err(Error::DegenerateInput(_))));
        let c = Grid::filled(3, 3, 1.0);
        assert!(matches!(chamfer(&c, &c, &MetricConfig::default()), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn distance_transform_single_point() {
        let m = Mask::from_points(5, 7, &[(2, 3)]).unwrap();
        let d = distance_to_mask(&m);
        for y in 0..5 {
            for x in 0..7 {
                let want = (((y as f64) - 2.0).powi(2) + ((x as f64) - 3.0).powi(2)).sqrt();
                assert!((d.get(y, x) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert!((percentile(&v, 90.0) - 4.6).abs() < 1e-12);
        assert_eq!(percentile(&v, 100.0), 5.0);
    }
}
