//! Output-based uncertainty baselines.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::io::Tensor;
use crate::pipeline::UncertaintyMap;

/// Per-pixel class vectors must sum to one within this tolerance.
pub const SIMPLEX_TOL: f64 = 1e-4;
/// Probabilities below `-NEGATIVE_TOL` are rejected; smaller dips count as 0.
pub const NEGATIVE_TOL: f64 = 1e-6;

/// `K x H x W` class probabilities for one prediction, in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    classes: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl ProbabilityMap {
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let shape = t.shape();
        if shape.len() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "expected K x H x W probabilities, got {shape:?}"
            )));
        }
        let data = t
            .as_f32()
            .ok_or_else(|| Error::ShapeMismatch("probabilities must be real-valued".into()))?
            .iter()
            .map(|&p| p as f64)
            .collect();
        Self::new(shape[0], shape[1], shape[2], data)
    }

    pub fn new(classes: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if classes == 0 || h == 0 || w == 0 || data.len() != classes * h * w {
            return Err(Error::ShapeMismatch(format!(
                "{classes}x{h}x{w} probabilities with {} values",
                data.len()
            )));
        }
        let m = Self { classes, h, w, data };
        m.check_simplex()?;
        Ok(m)
    }

    fn check_simplex(&self) -> Result<()> {
        let n = self.h * self.w;
        for i in 0..n {
            let mut total = 0.0;
            for c in 0..self.classes {
                let p = self.data[c * n + i];
                if !(p >= -NEGATIVE_TOL) || !p.is_finite() {
                    return Err(Error::DegenerateInput(format!(
                        "probability {p} for class {c} at pixel {i}"
                    )));
                }
                total += p;
            }
            if (total - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::DegenerateInput(format!(
                    "class probabilities at pixel {i} sum to {total}"
                )));
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn hw(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    fn pixel_map(&self, tag: &str, f: impl Fn(&mut dyn Iterator<Item = f64>) -> f64) -> UncertaintyMap {
        let n = self.h * self.w;
        let values = (0..n)
            .map(|i| f(&mut (0..self.classes).map(|c| self.data[c * n + i])))
            .collect();
        UncertaintyMap::new(Grid::new(self.h, self.w, values).expect("shape"), tag)
    }
}

/// `M x K x H x W` stack of member (or pass) probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityStack {
    members: Vec<ProbabilityMap>,
}

impl ProbabilityStack {
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let shape = t.shape();
        if shape.len() != 4 {
            return Err(Error::ShapeMismatch(format!(
                "expected M x K x H x W probabilities, got {shape:?}"
            )));
        }
        let vals = t
            .as_f32()
            .ok_or_else(|| Error::ShapeMismatch("probabilities must be real-valued".into()))?;
        let per = shape[1] * shape[2] * shape[3];
        let members = vals
            .chunks_exact(per)
            .map(|chunk| {
                ProbabilityMap::new(
                    shape[1],
                    shape[2],
                    shape[3],
                    chunk.iter().map(|&p| p as f64).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(members)
    }

    pub fn new(members: Vec<ProbabilityMap>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::DegenerateInput("probability stack has no members".into()));
        };
        for m in &members[1..] {
            if m.classes != first.classes || m.hw() != first.hw() {
                return Err(Error::ShapeMismatch(format!(
                    "member shape {}x{}x{} differs from {}x{}x{}",
                    m.classes, m.h, m.w, first.classes, first.h, first.w
                )));
            }
        }
        Ok(Self { members })
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    /// Member-averaged class probabilities.
    pub fn mean(&self) -> ProbabilityMap {
        let first = &self.members[0];
        let mut data = vec![0.0; first.data.len()];
        for m in &self.members {
            for (d, p) in data.iter_mut().zip(&m.data) {
                *d += p;
            }
        }
        let count = self.members.len() as f64;
        data.iter_mut().for_each(|d| *d /= count);
        ProbabilityMap {
            data,
            ..first.clone()
        }
    }

    pub fn members(&self) -> &[ProbabilityMap] {
        &self.members
    }
}

/// `E x H x W` predicted class per training epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionStack {
    epochs: usize,
    h: usize,
    w: usize,
    data: Vec<i32>,
}

impl PredictionStack {
    pub fn from_tensor(t: &Tensor, classes: Option<usize>) -> Result<Self> {
        let shape = t.shape();
        if shape.len() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "expected E x H x W predictions, got {shape:?}"
            )));
        }
        let data = t
            .as_i32()
            .ok_or_else(|| Error::ShapeMismatch("predictions must be int32".into()))?
            .to_vec();
        Self::new(shape[0], shape[1], shape[2], data, classes)
    }

    pub fn new(epochs: usize, h: usize, w: usize, data: Vec<i32>, classes: Option<usize>) -> Result<Self> {
        if epochs == 0 || h == 0 || w == 0 || data.len() != epochs * h * w {
            return Err(Error::ShapeMismatch(format!(
                "{epochs}x{h}x{w} predictions with {} values",
                data.len()
            )));
        }
        let limit = classes.map_or(i64::MAX, |k| k as i64);
        if let Some(bad) = data.iter().find(|&&c| c < 0 || c as i64 >= limit) {
            return Err(Error::DegenerateInput(format!("class id {bad} out of range")));
        }
        Ok(Self { epochs, h, w, data })
    }

    pub fn epoch_count(&self) -> usize {
        self.epochs
    }
}

fn entropy(ps: &mut dyn Iterator<Item = f64>) -> f64 {
    -ps.filter(|&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Predictive entropy `-Σ p ln p` per pixel, in nats.
pub fn softmax_entropy(probs: &ProbabilityMap) -> UncertaintyMap {
    probs.pixel_map("entropy", entropy)
}

/// `1 - max_c p_c` per pixel.
pub fn one_minus_msp(probs: &ProbabilityMap) -> UncertaintyMap {
    probs.pixel_map("msp", |ps| 1.0 - ps.fold(f64::NEG_INFINITY, f64::max))
}

/// Entropy of the member-averaged probabilities (deep ensemble or
/// MC-dropout passes).
pub fn ensemble_entropy(stack: &ProbabilityStack) -> UncertaintyMap {
    stack.mean().pixel_map("ensemble", entropy)
}

/// Number of epoch-to-epoch changes of the predicted class per pixel.
pub fn prediction_switches(stack: &PredictionStack) -> UncertaintyMap {
    let n = stack.h * stack.w;
    let values = (0..n)
        .map(|i| {
            (1..stack.epochs)
                .filter(|&e| stack.data[e * n + i] != stack.data[(e - 1) * n + i])
                .count() as f64
        })
        .collect();
    UncertaintyMap::new(Grid::new(stack.h, stack.w, values).expect("shape"), "switches")
}
