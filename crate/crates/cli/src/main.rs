//! `fplearn` binary: simulate, compare, preset, list-presets.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use fplearn_cli::compare::{compare_runs, Metric};
use fplearn_cli::config::{load_config, ExperimentConfig};
use fplearn_cli::error::{CliError, CliResult};
use fplearn_cli::presets;
use fplearn_cli::runner::{run_experiment, RunArtifacts};
use std::path::{Path, PathBuf};

const OUT_ENV: &str = "FPLEARN_OUT";

#[derive(Parser)]
#[command(name = "fplearn", version, about = "Fictitious-play learning experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment described by a JSON config file.
    Simulate {
        /// Path to the config file.
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides config and FPLEARN_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run this many replicates concurrently, seeds base, base+1, ...
        #[arg(long, default_value_t = 1)]
        replicates: u64,
    },
    /// Diff the observable series of two runs on one metric.
    Compare {
        /// Manifest of the first run.
        #[arg(long)]
        a: PathBuf,
        /// Manifest of the second run.
        #[arg(long)]
        b: PathBuf,
        /// One of: lambda, mean_br, mean_prior.
        #[arg(long)]
        metric: String,
    },
    /// Run a named preset experiment.
    Preset {
        /// Preset name; see `list-presets`.
        name: String,
        /// Output directory (overrides FPLEARN_OUT and the default).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the presets shipped with the binary.
    ListPresets,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code().into());
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Cmd::Simulate { config, seed, out, replicates } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            let dir = resolve_out_dir(out, cfg.out_dir.clone(), PathBuf::from("out"));
            simulate(cfg, &dir, replicates)
        }
        Cmd::Compare { a, b, metric } => {
            let metric = Metric::parse(&metric)?;
            let (_, text) = compare_runs(&a, &b, metric, Path::new("."))?;
            print!("{text}");
            println!("report written to {}", Path::new(fplearn_cli::compare::REPORT_NAME).display());
            Ok(())
        }
        Cmd::Preset { name, out } => {
            let cfg = presets::load(&name)?;
            let default = PathBuf::from("out").join(&name);
            let dir = resolve_out_dir(out, cfg.out_dir.clone(), default);
            simulate(cfg, &dir, 1)
        }
        Cmd::ListPresets => {
            for p in presets::PRESETS {
                println!("{:<16} {}", p.name, p.summary);
            }
            Ok(())
        }
    }
}

/// Output directory precedence: `--out` flag, then the `FPLEARN_OUT`
/// environment variable, then the config's `output.dir`, then a default.
fn resolve_out_dir(flag: Option<PathBuf>, from_config: Option<PathBuf>, default: PathBuf) -> PathBuf {
    if let Some(dir) = flag {
        return dir;
    }
    if let Some(dir) = std::env::var_os(OUT_ENV) {
        return PathBuf::from(dir);
    }
    from_config.unwrap_or(default)
}

fn report(run: &RunArtifacts) {
    println!(
        "wrote {} ({} files, engine {}, seed {})",
        run.manifest_path.display(),
        run.manifest.files.len(),
        run.manifest.engine,
        run.manifest.seed
    );
}

fn simulate(cfg: ExperimentConfig, dir: &Path, replicates: u64) -> CliResult<()> {
    if replicates == 0 {
        return Err(CliError::Validation("--replicates must be at least 1".into()));
    }
    if replicates == 1 {
        let run = run_experiment(&cfg, dir)?;
        report(&run);
        return Ok(());
    }
    let base = cfg.seed;
    let mut slots: Vec<Option<CliResult<RunArtifacts>>> = Vec::new();
    slots.resize_with(replicates as usize, || None);
    std::thread::scope(|scope| {
        for (i, slot) in slots.iter_mut().enumerate() {
            let rep = cfg.clone().with_seed(base + i as u64);
            let sub = dir.join(format!("rep-{i}-seed-{}", base + i as u64));
            scope.spawn(move || {
                *slot = Some(run_experiment(&rep, &sub));
            });
        }
    });
    let mut first_err = None;
    for slot in slots {
        match slot.expect("replicate thread finished") {
            Ok(run) => report(&run),
            Err(e) => {
                eprintln!("replicate failed: {e}");
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    match first_err {
        None => Ok(()),
        Some(e) => Err(e),
    }
}
