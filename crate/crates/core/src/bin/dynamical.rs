//! Command-line front end.
//!
//! Exit codes: 0 success, 2 a seed or check failed, 3 invalid configuration
//! or input.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dynamical::harness::{
    run_active_learning, verify_suite, write_outputs, DatasetSpec, ExperimentConfig, Scale, SweepConfig,
};
use dynamical::Error;

#[derive(Parser)]
#[command(name = "dynamical", version, about = "Active learning by training-dynamics acquisition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment over all configured seeds.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a strategy × query-size grid; one subdirectory per cell.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the self-verification suite.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        scale: Scale,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for `verify.json` and `bounds.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset as CSV.
    Dataset {
        #[arg(long, value_enum)]
        kind: DatasetKind,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        /// Mixture component standard deviation.
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        mean_scale: f64,
        /// Ring radii, comma separated; one class per radius.
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        radii: Vec<f64>,
        /// Radial noise for rings.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    #[value(name = "gaussian_mixture")]
    GaussianMixture,
    Rings,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Input(_) | Error::Json(_) | Error::Csv(_) => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn run_one(config: &ExperimentConfig, out: &Path) -> Result<bool, Failure> {
    let result = run_active_learning(config)?;
    write_outputs(out, config, &result)?;
    for s in &result.seeds {
        match &s.error {
            Some(e) => eprintln!("seed {}: failed after {} rounds: {e}", s.seed, s.records.len()),
            None => eprintln!("seed {}: {} rounds", s.seed, s.records.len()),
        }
    }
    Ok(!result.has_errors())
}

fn execute(command: Command) -> Result<bool, Failure> {
    match command {
        Command::Run { config, out } => {
            let config = ExperimentConfig::from_path(&config)?;
            run_one(&config, &out)
        }
        Command::Sweep { config, out } => {
            let sweep = SweepConfig::from_path(&config)?;
            let cells = sweep.expand()?;
            for c in &cells {
                c.validate()?;
            }
            let mut ok = true;
            for c in &cells {
                let dir = out.join(format!("{}_b{}", c.strategy.name(), c.query_size));
                eprintln!("{}", dir.display());
                ok &= run_one(c, &dir)?;
            }
            Ok(ok)
        }
        Command::Verify { scale, seed, out } => {
            let report = verify_suite(scale, seed);
            for c in &report.checks {
                println!(
                    "{} {:<32} {}/{} worst={:e} {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.instances - c.failures,
                    c.instances,
                    c.worst_residual,
                    c.detail
                );
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(Error::from)?;
                let json = serde_json::to_string_pretty(&report.to_json()?).map_err(Error::from)?;
                std::fs::write(dir.join("verify.json"), json + "\n").map_err(Error::from)?;
                let f = std::fs::File::create(dir.join("bounds.csv")).map_err(Error::from)?;
                report.write_bounds_csv(std::io::BufWriter::new(f)).map_err(Error::from)?;
            }
            Ok(report.passed)
        }
        Command::Dataset { kind, classes, dim, per_class, sigma, mean_scale, radii, noise, seed, out } => {
            let spec = match kind {
                DatasetKind::GaussianMixture => {
                    DatasetSpec::GaussianMixture { classes, dim, per_class, sigma, mean_scale, seed }
                }
                DatasetKind::Rings => DatasetSpec::Rings { radii, noise, per_class, seed },
            };
            spec.validate()?;
            let data = spec.generate()?;
            data.write_csv(&out)?;
            eprintln!("{} samples, {} classes, dim {}", data.len(), data.classes, data.dim());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
