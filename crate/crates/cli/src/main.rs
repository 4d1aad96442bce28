use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use wpc_secrecy::experiment::{any_failure, check_rows, figure_preset, read_csv, run, write_csv, ExperimentConfig};

/// Exit status when some cells failed to converge; the CSV is still written.
const EXIT_PARTIAL: u8 = 3;
/// Exit status for invalid input.
const EXIT_ERROR: u8 = 2;
/// Exit status when `check` finds a violated invariant.
const EXIT_CHECK_FAILED: u8 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "wpcsec",
    version,
    about = "Capacity, outage and secrecy sweeps for wireless-powered links"
)]
struct Cli {
    /// Monte Carlo seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo sample count, overriding the configuration.
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Worker threads (default: all cores). Never changes results.
    #[arg(long, global = true, env = "WPCSEC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a sweep described by a TOML configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV; defaults to the config's output_path, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// `key=value` replacement for a configuration entry, e.g. `mc.n_samples=1e5`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a built-in figure configuration.
    Preset {
        /// One of fig2, fig3, fig4, fig4b, fig5, fig6, fig7, fig8.
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Print the resolved configuration as TOML instead of running it.
        #[arg(long)]
        print_config: bool,
    },
    /// Assert the ordering, crossover and agreement invariants on a CSV.
    Check { csv: PathBuf },
}

fn global_overrides(cli: &Cli) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(seed) = cli.seed {
        out.push(format!("mc.seed={seed}"));
    }
    if let Some(n) = cli.samples {
        out.push(format!("mc.n_samples={n}"));
    }
    out
}

fn resolve(base: ExperimentConfig, cli: &Cli, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut all = overrides.to_vec();
    all.extend(global_overrides(cli));
    Ok(base.with_overrides(&all)?)
}

fn execute(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExitCode> {
    let rows = run(cfg)?;
    match out.or(cfg.output_path.as_deref()) {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            write_csv(&rows, BufWriter::new(file))?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => write_csv(&rows, io::stdout().lock())?,
    }
    if any_failure(&rows) {
        eprintln!("some cells did not converge; see the status column");
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

fn check(path: &Path) -> Result<ExitCode> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let rows = read_csv(file)?;
    let report = check_rows(&rows);
    let mut stdout = io::stdout().lock();
    for o in &report.outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        writeln!(stdout, "{tag} {}: {}", o.name, o.detail)?;
    }
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    })
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match &cli.command {
        Command::Run { config, out, overrides } => {
            let base = ExperimentConfig::from_path(config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = resolve(base, cli, overrides)?;
            execute(&cfg, out.as_deref())
        }
        Command::Preset {
            name,
            out,
            overrides,
            print_config,
        } => {
            let cfg = resolve(figure_preset(name)?, cli, overrides)?;
            if *print_config {
                print!("{}", cfg.to_toml_string()?);
                return Ok(ExitCode::SUCCESS);
            }
            execute(&cfg, out.as_deref())
        }
        Command::Check { csv } => check(csv),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
