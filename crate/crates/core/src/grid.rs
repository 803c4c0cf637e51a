use crate::error::{Error, Result};

/// Dense row-major `h x w` grid of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::ShapeMismatch(format!("empty grid {h}x{w}")));
        }
        if data.len() != h * w {
            return Err(Error::ShapeMismatch(format!(
                "grid {h}x{w} needs {} values, got {}",
                h * w,
                data.len()
            )));
        }
        Ok(Self { h, w, data })
    }

    pub fn filled(h: usize, w: usize, value: f64) -> Self {
        assert!(h > 0 && w > 0, "empty grid");
        Self {
            h,
            w,
            data: vec![value; h * w],
        }
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(h > 0 && w > 0, "empty grid");
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                data.push(f(y, x));
            }
        }
        Self { h, w, data }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn hw(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f64) {
        self.data[y * self.w + x] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid {
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Min-max rescale to `[0, 1]`; a constant grid maps to all zeros.
    pub fn min_max_normalized(&self) -> Grid {
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        if !(span > 0.0) || !span.is_finite() {
            return Grid::filled(self.h, self.w, 0.0);
        }
        self.map(|v| (v - lo) / span)
    }

    pub fn is_constant(&self) -> bool {
        let first = self.data[0];
        self.data.iter().all(|&v| v == first)
    }

    pub(crate) fn check_same_shape(&self, other: &Grid) -> Result<()> {
        if self.hw() != other.hw() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.h, self.w, other.h, other.w
            )));
        }
        Ok(())
    }
}

/// `C x H x W` stack of real feature channels held in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || h == 0 || w == 0 || data.len() != channels * h * w {
            return Err(Error::ShapeMismatch(format!(
                "feature map {channels}x{h}x{w} with {} values",
                data.len()
            )));
        }
        Ok(Self { channels, h, w, data })
    }

    pub fn from_tensor(t: &crate::io::Tensor) -> Result<Self> {
        let shape = t.shape();
        if shape.len() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "expected C x H x W features, got shape {shape:?}"
            )));
        }
        let data = match t.data() {
            crate::io::TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            crate::io::TensorData::I32(v) => v.iter().map(|&x| x as f64).collect(),
        };
        Self::new(shape[0], shape[1], shape[2], data)
    }

    pub fn to_tensor(&self) -> crate::io::Tensor {
        crate::io::Tensor::from_f32(
            vec![self.channels, self.h, self.w],
            self.data.iter().map(|&v| v as f32).collect(),
        )
        .expect("shape is consistent")
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn hw(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.h + y) * self.w + x]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.h * self.w;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}
