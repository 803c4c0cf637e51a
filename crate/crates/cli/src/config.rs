//! Run configuration: defaults, then the optional TOML file, then flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use radmi_core::metrics::MetricConfig;
use radmi_core::{AggregationConfig, MiConfig, Weighting};
use serde::{Deserialize, Serialize};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub jobs: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub reference: Option<String>,
    #[serde(default)]
    pub mi: FileMi,
    #[serde(default)]
    pub aggregation: FileAggregation,
    #[serde(default)]
    pub metrics: FileMetrics,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileMi {
    pub patch: Option<usize>,
    pub stride: Option<usize>,
    pub epsilon: Option<f64>,
    pub projection_dim: Option<usize>,
    pub projection_seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileAggregation {
    pub weighting: Option<Weighting>,
    pub normalize_per_pair: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileMetrics {
    pub bins: Option<usize>,
    pub thresholds: Option<Vec<f64>>,
    pub chamfer_percentile: Option<f64>,
    pub smoothing_eps: Option<f64>,
}

pub fn load_file(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Dataset root containing `sections/<id>/`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for section-level parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MiArgs {
    /// Odd window side.
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Covariance shrinkage strength.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Random-projection width applied to each layer before estimating.
    #[arg(long)]
    pub projection_dim: Option<usize>,
    /// Seed for the random projection.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_weighting)]
    pub weighting: Option<Weighting>,
    /// Combine raw MI maps instead of min-max normalized ones.
    #[arg(long)]
    pub no_normalize_pairs: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MetricArgs {
    /// Histogram bins for EMD and histogram intersection.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Comma-separated mIoU / DICE thresholds.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Percentile used to binarize maps for Chamfer.
    #[arg(long)]
    pub chamfer_pct: Option<f64>,
}

fn parse_weighting(s: &str) -> Result<Weighting, String> {
    match s {
        "resolution" => Ok(Weighting::Resolution),
        "uniform" => Ok(Weighting::Uniform),
        _ => Err(format!("expected resolution or uniform, got {s}")),
    }
}

/// Resolved settings echoed into every manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub mi: MiConfig,
    pub aggregation: AggregationConfig,
    pub metrics: MetricConfig,
}

impl RunConfig {
    pub fn resolve(file: &FileConfig, mi: &MiArgs, metrics: &MetricArgs) -> anyhow::Result<Self> {
        let d = MiConfig::default();
        let mi_cfg = MiConfig {
            patch: mi.patch.or(file.mi.patch).unwrap_or(d.patch),
            stride: mi.stride.or(file.mi.stride).unwrap_or(d.stride),
            epsilon: mi.epsilon.or(file.mi.epsilon).unwrap_or(d.epsilon),
            projection_dim: mi.projection_dim.or(file.mi.projection_dim).or(d.projection_dim),
            projection_seed: mi.seed.or(file.mi.projection_seed).unwrap_or(d.projection_seed),
        };
        mi_cfg.validate()?;

        let d = AggregationConfig::default();
        let normalize = if mi.no_normalize_pairs {
            false
        } else {
            file.aggregation.normalize_per_pair.unwrap_or(d.normalize_per_pair)
        };
        let agg = AggregationConfig {
            weighting: mi.weighting.or(file.aggregation.weighting).unwrap_or(d.weighting),
            normalize_per_pair: normalize,
            output_hw: None,
        };

        let d = MetricConfig::default();
        let metric_cfg = MetricConfig {
            bins: metrics.bins.or(file.metrics.bins).unwrap_or(d.bins),
            thresholds: metrics
                .thresholds
                .clone()
                .or_else(|| file.metrics.thresholds.clone())
                .unwrap_or(d.thresholds),
            chamfer_percentile: metrics
                .chamfer_pct
                .or(file.metrics.chamfer_percentile)
                .unwrap_or(d.chamfer_percentile),
            smoothing_eps: file.metrics.smoothing_eps.unwrap_or(d.smoothing_eps),
        };
        metric_cfg.validate()?;

        Ok(Self {
            mi: mi_cfg,
            aggregation: agg,
            metrics: metric_cfg,
        })
    }
}

pub fn resolve_jobs(flag: Option<usize>, file: &FileConfig) -> anyhow::Result<usize> {
    let jobs = flag.or(file.jobs).unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    });
    if jobs == 0 {
        bail!(radmi_core::Error::Config("--jobs must be at least 1".into()));
    }
    Ok(jobs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str(
            r#"
            jobs = 3
            [mi]
            patch = 9
            epsilon = 0.01
            [aggregation]
            weighting = "uniform"
            normalize_per_pair = true
            [metrics]
            bins = 32
            "#,
        )
        .unwrap();
        let mi = MiArgs {
            patch: Some(5),
            no_normalize_pairs: true,
            ..MiArgs::default()
        };
        let cfg = RunConfig::resolve(&file, &mi, &MetricArgs::default()).unwrap();
        assert_eq!(cfg.mi.patch, 5);
        assert_eq!(cfg.mi.epsilon, 0.01);
        assert_eq!(cfg.aggregation.weighting, Weighting::Uniform);
        assert!(!cfg.aggregation.normalize_per_pair);
        assert_eq!(cfg.metrics.bins, 32);
        assert_eq!(resolve_jobs(None, &file).unwrap(), 3);
        assert_eq!(resolve_jobs(Some(1), &file).unwrap(), 1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[mi]\npatchh = 3\n").is_err());
    }

    #[test]
    fn invalid_values_fail_validation() {
        let file = FileConfig::default();
        let even = MiArgs {
            patch: Some(4),
            ..MiArgs::default()
        };
        assert!(RunConfig::resolve(&file, &even, &MetricArgs::default()).is_err());
        let bad = MetricArgs {
            thresholds: Some(vec![0.0, 0.5]),
            ..MetricArgs::default()
        };
        assert!(RunConfig::resolve(&file, &MiArgs::default(), &bad).is_err());
    }
}
