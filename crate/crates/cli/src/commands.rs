use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use log::{info, warn};
use radmi_core::io::list_sections;
use radmi_core::metrics::{aggregate_sections, evaluate_all, MetricReport, SectionMetrics};
use radmi_core::synth::{
    gen_boundary_scene, gen_correlated_field, mini_dataset, SyntheticSpec,
};
use radmi_core::{load_section, read_tensor, write_tensor, Error, Grid, Method, SectionDataset, Tensor};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::report::{self, Row, Summary};

pub const MANIFEST_SUFFIX: &str = ".manifest.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const REFERENCE_FILE: &str = "reference.npy";
pub const BAND_MASK_FILE: &str = "band_mask.npy";

/// Per-section failures that did not stop the run; mapped to the exit code
/// of the most severe one.
#[derive(Debug)]
pub struct SectionFailures {
    pub failures: Vec<(String, Error)>,
}

impl std::fmt::Display for SectionFailures {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} section(s) failed", self.failures.len())
    }
}

impl std::error::Error for SectionFailures {}

impl SectionFailures {
    pub fn numerical(&self) -> bool {
        self.failures.iter().any(|(_, e)| e.is_numerical())
    }
}

fn pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("starting worker pool")
}

fn section_paths(dataset: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let paths = list_sections(dataset)?;
    if paths.is_empty() {
        bail!(Error::Format(format!("{} has no sections", dataset.display())));
    }
    Ok(paths)
}

fn section_id(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Run `f` on every section in a pool of `jobs` workers; results come back
/// in sorted section-id order.
fn for_sections<T: Send>(
    paths: &[PathBuf],
    jobs: usize,
    f: impl Fn(&Path) -> Result<T, Error> + Sync,
) -> anyhow::Result<Vec<(String, Result<T, Error>)>> {
    let pool = pool(jobs)?;
    Ok(pool.install(|| {
        paths
            .par_iter()
            .map(|p| (section_id(p), f(p)))
            .collect()
    }))
}

fn write_map(out: &Path, section: &str, method: Method, map: &Grid) -> Result<PathBuf, Error> {
    let dir = out.join(section);
    fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let rel = PathBuf::from(section).join(format!("{}.npy", method.name()));
    write_tensor(&Tensor::from_grid(map), out.join(&rel))?;
    Ok(rel)
}

#[derive(Serialize)]
struct ManifestEntry {
    section_id: String,
    output: String,
    shape: [usize; 2],
    forward_passes: usize,
}

#[derive(Serialize)]
struct ManifestFailure {
    section_id: String,
    error: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    method: &'static str,
    dataset: String,
    config: &'a RunConfig,
    sections: Vec<ManifestEntry>,
    failures: Vec<ManifestFailure>,
}

/// Compute one method's map for every section and write a manifest.
pub fn compute_maps(
    method: Method,
    dataset: &Path,
    out: &Path,
    cfg: &RunConfig,
    jobs: usize,
) -> anyhow::Result<()> {
    let paths = section_paths(dataset)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let results = for_sections(&paths, jobs, |p| {
        let section = load_section(p)?;
        let passes = method.forward_passes(&section);
        let map = method.compute(&section, &cfg.mi, &cfg.aggregation)?;
        let rel = write_map(out, &section.section_id, method, &map.values)?;
        Ok(ManifestEntry {
            section_id: section.section_id.clone(),
            output: rel.to_string_lossy().replace('\\', "/"),
            shape: map.values.hw().into(),
            forward_passes: passes.unwrap_or(0),
        })
    })?;

    let mut sections = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(entry) => {
                info!("{id}: wrote {}", entry.output);
                sections.push(entry);
            }
            Err(e) => {
                eprintln!("error: section {id}: {e}");
                failures.push((id, e));
            }
        }
    }
    let manifest = Manifest {
        tool: "radmi",
        version: env!("CARGO_PKG_VERSION"),
        method: method.name(),
        dataset: dataset.display().to_string(),
        config: cfg,
        sections,
        failures: failures
            .iter()
            .map(|(id, e)| ManifestFailure {
                section_id: id.clone(),
                error: e.to_string(),
            })
            .collect(),
    };
    let path = out.join(format!("{}{MANIFEST_SUFFIX}", method.name()));
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(SectionFailures { failures }.into())
    }
}

#[derive(Debug, Clone)]
pub enum Reference {
    Method(Method),
    /// Directory holding `<section_id>/reference.npy`.
    Dir(PathBuf),
}

impl Reference {
    pub fn parse(s: &str) -> anyhow::Result<Self> {
        if let Some(m) = Method::from_name(s) {
            return Ok(Reference::Method(m));
        }
        let p = PathBuf::from(s);
        if p.is_dir() {
            Ok(Reference::Dir(p))
        } else {
            bail!(Error::Config(format!(
                "reference {s:?} is neither a method name nor a directory"
            )))
        }
    }

    fn label(&self) -> String {
        match self {
            Reference::Method(m) => m.name().to_string(),
            Reference::Dir(p) => p.display().to_string(),
        }
    }

    fn load(&self, section: &SectionDataset, cfg: &RunConfig) -> Result<Grid, Error> {
        match self {
            Reference::Method(m) => Ok(m.compute(section, &cfg.mi, &cfg.aggregation)?.values),
            Reference::Dir(dir) => read_tensor(dir.join(&section.section_id).join(REFERENCE_FILE))?.to_grid(),
        }
    }
}

pub struct EvalArgs<'a> {
    pub dataset: &'a Path,
    pub out: &'a Path,
    pub methods: &'a [Method],
    pub reference: &'a Reference,
    /// Directory of precomputed `<section_id>/<method>.npy` maps.
    pub maps: Option<&'a Path>,
    pub cfg: &'a RunConfig,
    pub jobs: usize,
}

struct SectionEval {
    /// Per requested method, its metrics or the reason it was excluded.
    methods: Vec<Result<SectionMetrics, String>>,
    passes: Vec<Option<usize>>,
}

fn method_map(a: &EvalArgs<'_>, section: &SectionDataset, method: Method) -> Result<Grid, Error> {
    if let Some(dir) = a.maps {
        let p = dir.join(&section.section_id).join(format!("{}.npy", method.name()));
        if p.exists() {
            return read_tensor(p)?.to_grid();
        }
        info!("{}: {} not found, computing", section.section_id, p.display());
    }
    Ok(method.compute(section, &a.cfg.mi, &a.cfg.aggregation)?.values)
}

fn eval_section(a: &EvalArgs<'_>, path: &Path) -> Result<SectionEval, Error> {
    let section = load_section(path)?;
    let reference = a.reference.load(&section, a.cfg)?;
    let mut methods = Vec::new();
    for &m in a.methods {
        let map = method_map(a, &section, m)?;
        if map.hw() != reference.hw() {
            return Err(Error::ShapeMismatch(format!(
                "{} map is {:?} but the reference is {:?}",
                m.name(),
                map.hw(),
                reference.hw()
            )));
        }
        let mut values = SectionMetrics::new();
        let mut degenerate = None;
        for (metric, r) in evaluate_all(&map, &reference, &a.cfg.metrics) {
            match r {
                Ok(v) => {
                    values.insert(metric.name().to_string(), v);
                }
                Err(Error::DegenerateInput(why)) => {
                    degenerate.get_or_insert(format!("{}: {why}", metric.name()));
                }
                Err(e) => return Err(e),
            }
        }
        methods.push(match degenerate {
            Some(why) => Err(why),
            None => Ok(values),
        });
    }
    let passes = a.methods.iter().map(|m| m.forward_passes(&section)).collect();
    Ok(SectionEval { methods, passes })
}

/// Evaluate method maps against the reference; writes `metrics.csv` and
/// `summary.txt` and returns the summary table.
pub fn eval(a: &EvalArgs<'_>) -> anyhow::Result<String> {
    if a.methods.is_empty() {
        bail!(Error::Config("eval needs at least one method".into()));
    }
    let paths = section_paths(a.dataset)?;
    fs::create_dir_all(a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let results = for_sections(&paths, a.jobs, |p| eval_section(a, p))?;

    let mut failed: Vec<(String, String)> = Vec::new();
    let mut failures = Vec::new();
    let mut excluded = Vec::new();
    let mut per_method: Vec<Vec<(String, SectionMetrics)>> = vec![Vec::new(); a.methods.len()];
    let mut passes: Vec<Option<(usize, usize)>> = vec![None; a.methods.len()];
    let mut evaluated = 0;
    for (id, r) in results {
        let ev = match r {
            Ok(ev) => ev,
            Err(e) => {
                eprintln!("error: section {id}: {e}");
                failed.push((id.clone(), e.to_string()));
                failures.push((id, e));
                continue;
            }
        };
        evaluated += 1;
        for (i, (m, r)) in a.methods.iter().zip(ev.methods).enumerate() {
            match r {
                Ok(values) => per_method[i].push((id.clone(), values)),
                Err(why) => {
                    warn!("section {id}, {}: excluded, {why}", m.name());
                    excluded.push((id.clone(), m.name().to_string(), why));
                }
            }
            if let Some(n) = ev.passes[i] {
                passes[i] = Some(passes[i].map_or((n, n), |(lo, hi)| (lo.min(n), hi.max(n))));
            }
        }
    }

    let rows: Vec<Row<'_>> = per_method
        .iter()
        .zip(a.methods)
        .flat_map(|(sections, m)| sections.iter().map(move |(id, v)| (id, m, v)))
        .map(|(id, m, v)| Row {
            section_id: id,
            method: m.name(),
            metrics: v,
        })
        .collect::<Vec<_>>();
    let mut rows = rows;
    // section-major, then the requested method order
    let order = |name: &str| a.methods.iter().position(|m| m.name() == name);
    rows.sort_by(|x, y| (x.section_id, order(x.method)).cmp(&(y.section_id, order(y.method))));
    let csv = report::csv(&rows);

    let mut reports: Vec<(String, Option<MetricReport>)> = Vec::new();
    for (m, sections) in a.methods.iter().zip(&per_method) {
        let r = if sections.is_empty() {
            None
        } else {
            Some(aggregate_sections(sections.clone())?)
        };
        reports.push((m.name().to_string(), r));
    }
    let mut pass_rows: Vec<(String, (usize, usize))> = a
        .methods
        .iter()
        .zip(&passes)
        .filter_map(|(m, p)| p.map(|p| (m.name().to_string(), p)))
        .collect();
    if let Reference::Method(r) = a.reference {
        if !a.methods.contains(r) {
            let counts: Vec<usize> = paths
                .iter()
                .filter_map(|p| load_section(p).ok())
                .filter_map(|s| r.forward_passes(&s))
                .collect();
            if let (Some(lo), Some(hi)) = (counts.iter().min(), counts.iter().max()) {
                pass_rows.push((format!("{} (reference)", r.name()), (*lo, *hi)));
            }
        }
    }
    let table = report::table(&Summary {
        reference: &a.reference.label(),
        evaluated,
        failed: &failed,
        excluded: &excluded,
        reports: &reports,
        passes: &pass_rows,
    });

    fs::write(a.out.join(METRICS_CSV), csv).context("writing metrics.csv")?;
    fs::write(a.out.join(SUMMARY_TXT), &table).context("writing summary.txt")?;
    if !failures.is_empty() {
        print!("{table}");
        return Err(SectionFailures { failures }.into());
    }
    if evaluated == 0 {
        bail!(Error::DegenerateInput("no section could be evaluated".into()));
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthKind {
    CorrelatedField,
    BoundaryScene,
    /// The miniature dataset used by the golden tests.
    Mini,
}

pub struct SynthArgs {
    pub kind: SynthKind,
    pub out: PathBuf,
    pub hw: Option<(usize, usize)>,
    pub channels: Option<usize>,
    pub rho: Option<f64>,
    pub band_width: Option<usize>,
    pub seed: u64,
}

/// Materialize a synthetic dataset under `out/sections/`; returns the
/// analytic MI when the generator defines one.
pub fn synth(a: &SynthArgs) -> anyhow::Result<Option<f64>> {
    let sections = a.out.join("sections");
    match a.kind {
        SynthKind::Mini => {
            for s in mini_dataset(a.seed)? {
                s.write(sections.join(&s.section_id))?;
            }
            Ok(None)
        }
        SynthKind::CorrelatedField => {
            let Some(rho) = a.rho else {
                bail!(Error::Config("correlated-field needs --rho".into()));
            };
            let spec = SyntheticSpec::correlated_field(
                a.hw.unwrap_or((64, 64)),
                a.channels.unwrap_or(1),
                rho,
                a.seed,
            );
            let field = gen_correlated_field(&spec)?;
            let section = SectionDataset {
                section_id: "field".into(),
                decoder_features: vec![field.feat_a, field.feat_b],
                probs: None,
                ensemble_probs: None,
                dropout_probs: None,
                epoch_preds: None,
                labels: None,
            };
            section.write(sections.join(&section.section_id))?;
            Ok(Some(field.true_mi))
        }
        SynthKind::BoundaryScene => {
            let d = SyntheticSpec::boundary_scene(a.seed);
            let spec = SyntheticSpec {
                hw: a.hw.unwrap_or(d.hw),
                channels: a.channels.unwrap_or(d.channels),
                band_width: a.band_width.unwrap_or(d.band_width),
                ..d
            };
            let scene = gen_boundary_scene(&spec)?;
            let (h, w) = spec.hw;
            let section = SectionDataset {
                section_id: "scene".into(),
                decoder_features: scene.features,
                probs: None,
                ensemble_probs: None,
                dropout_probs: None,
                epoch_preds: None,
                labels: Some(Tensor::from_i32(vec![h, w], scene.labels)?),
            };
            let dir = sections.join(&section.section_id);
            section.write(&dir)?;
            write_tensor(&Tensor::from_grid(&scene.reference.values), dir.join(REFERENCE_FILE))?;
            let band: Vec<i32> = (0..h * w).map(|i| scene.band_mask.get(i / w, i % w) as i32).collect();
            write_tensor(&Tensor::from_i32(vec![h, w], band)?, dir.join(BAND_MASK_FILE))?;
            Ok(None)
        }
    }
}
