//! `radmi` command-line front end.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::bail;
use clap::{Parser, Subcommand};
use radmi_core::{Error, Method};

use commands::{EvalArgs, Reference, SectionFailures, SynthArgs, SynthKind};
use config::{load_file, resolve_jobs, CommonArgs, MetricArgs, MiArgs, RunConfig};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "radmi", version, about = "Single-pass uncertainty maps from decoder mutual information")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute RADMI maps for every section.
    Radmi {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        mi: MiArgs,
    },
    /// Compute a baseline map (entropy, msp, ensemble, mcdropout, switches).
    Baseline {
        #[arg(value_parser = parse_baseline)]
        name: Method,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Compare method maps against a reference map.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        mi: MiArgs,
        #[command(flatten)]
        metrics: MetricArgs,
        /// Comma-separated methods to evaluate.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Reference method name, or a directory of `<section_id>/reference.npy`.
        #[arg(long)]
        reference: Option<String>,
        /// Precomputed maps laid out as `<section_id>/<method>.npy`.
        #[arg(long)]
        maps: Option<PathBuf>,
    },
    /// Write a synthetic dataset.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        #[arg(long)]
        out: PathBuf,
        /// `HxW`, e.g. `64x64`.
        #[arg(long, value_parser = parse_hw)]
        hw: Option<(usize, usize)>,
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        rho: Option<f64>,
        #[arg(long)]
        band_width: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_baseline(s: &str) -> Result<Method, String> {
    match Method::from_name(s) {
        Some(Method::Radmi) | None => Err(format!(
            "unknown baseline {s:?}; expected entropy, msp, ensemble, mcdropout or switches"
        )),
        Some(m) => Ok(m),
    }
}

fn parse_hw(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once('x').ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let h = h.parse().map_err(|e| format!("bad height: {e}"))?;
    let w = w.parse().map_err(|e| format!("bad width: {e}"))?;
    Ok((h, w))
}

fn parse_methods(names: &[String]) -> anyhow::Result<Vec<Method>> {
    let mut out = Vec::new();
    for n in names.iter().map(|n| n.trim()).filter(|n| !n.is_empty()) {
        match Method::from_name(n) {
            Some(m) if !out.contains(&m) => out.push(m),
            Some(_) => {}
            None => bail!(Error::Config(format!("unknown method {n:?}"))),
        }
    }
    if out.is_empty() {
        bail!(Error::Config("the methods list is empty".into()));
    }
    Ok(out)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Radmi { common, mi } => {
            let file = load_file(common.config.as_deref())?;
            let cfg = RunConfig::resolve(&file, &mi, &MetricArgs::default())?;
            let jobs = resolve_jobs(common.jobs, &file)?;
            commands::compute_maps(Method::Radmi, &common.dataset, &common.out, &cfg, jobs)
        }
        Command::Baseline { name, common } => {
            let file = load_file(common.config.as_deref())?;
            let cfg = RunConfig::resolve(&file, &MiArgs::default(), &MetricArgs::default())?;
            let jobs = resolve_jobs(common.jobs, &file)?;
            commands::compute_maps(name, &common.dataset, &common.out, &cfg, jobs)
        }
        Command::Eval {
            common,
            mi,
            metrics,
            methods,
            reference,
            maps,
        } => {
            let file = load_file(common.config.as_deref())?;
            let cfg = RunConfig::resolve(&file, &mi, &metrics)?;
            let jobs = resolve_jobs(common.jobs, &file)?;
            let names = methods
                .or_else(|| file.methods.clone())
                .unwrap_or_else(|| vec![Method::Radmi.name().to_string()]);
            let methods = parse_methods(&names)?;
            let reference = reference
                .or_else(|| file.reference.clone())
                .unwrap_or_else(|| Method::Ensemble.name().to_string());
            let reference = Reference::parse(&reference)?;
            let table = commands::eval(&EvalArgs {
                dataset: &common.dataset,
                out: &common.out,
                methods: &methods,
                reference: &reference,
                maps: maps.as_deref(),
                cfg: &cfg,
                jobs,
            })?;
            print!("{table}");
            Ok(())
        }
        Command::Synth {
            kind,
            out,
            hw,
            channels,
            rho,
            band_width,
            seed,
        } => {
            let true_mi = commands::synth(&SynthArgs {
                kind,
                out,
                hw,
                channels,
                rho,
                band_width,
                seed,
            })?;
            if let Some(mi) = true_mi {
                println!("true_mi {mi:.6}");
            }
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(f) = err.downcast_ref::<SectionFailures>() {
        return if f.numerical() { EXIT_NUMERICAL } else { EXIT_INPUT };
    }
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RADMI_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
