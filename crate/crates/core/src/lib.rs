//! Single-pass segmentation uncertainty from decoder information flow.
//!
//! Consecutive decoder activations are compared with a sliding-window
//! Gaussian mutual information estimate. The per-pair maps are normalized,
//! upsampled and combined with resolution weights into one uncertainty map.
//! The crate also carries the usual baselines (softmax entropy, 1 - MSP,
//! ensemble / MC-dropout entropy, prediction switches), the agreement metrics
//! used to compare uncertainty maps against a reference, and seeded
//! synthetic generators with known ground truth.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod methods;
pub mod metrics;
pub mod mi;
pub mod pipeline;
pub mod resample;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{FeatureMap, Grid};
pub use io::{load_section, read_tensor, write_tensor, SectionDataset, Tensor, TensorData};
pub use methods::Method;
pub use mi::{gaussian_mi, windowed_mi_map, MiConfig, MiMap, WindowMode};
pub use pipeline::{radmi, AggregationConfig, UncertaintyMap, Weighting};

/// Run `f` over `0..n` and collect the results in index order.
///
/// Each index is evaluated exactly once, so the output does not depend on
/// how the work is scheduled.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
