use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mgtd_eval::config::{ReportFormat, RunConfig, Subtask};
use mgtd_eval::corpus::enum_str;
use mgtd_eval::pipeline;
use mgtd_eval::Error;

#[derive(Parser)]
#[command(name = "mgtd-eval", version, about = "Calibrated evaluation for machine-generated-text detectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Path to the TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Override the corpus path from the configuration.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    master_seed: Option<u64>,
    /// Override the subtask (a, b, custom).
    #[arg(long)]
    subtask: Option<String>,
    /// Extra `field=value` filter clauses (implies the custom subtask
    /// unless a subtask is set explicitly).
    #[arg(long = "filter")]
    filters: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut config = RunConfig::load(&self.config)?;
        if let Some(corpus) = &self.corpus {
            config.corpus = corpus.clone();
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
        if let Some(seed) = self.master_seed {
            config.master_seed = seed;
        }
        if let Some(subtask) = &self.subtask {
            config.subtask = match subtask.as_str() {
                "a" => Subtask::A,
                "b" => Subtask::B,
                "custom" => Subtask::Custom,
                other => {
                    return Err(Error::Config(format!("unknown subtask `{other}`")))
                }
            };
        }
        if !self.filters.is_empty() {
            config.filter.extend(self.filters.iter().cloned());
            if self.subtask.is_none() {
                config.subtask = Subtask::Custom;
            }
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check corpus schema, invariants, and shape; print a profile.
    Validate(Common),
    /// Generate attacked variants of all unattacked machine documents.
    Attack(Common),
    /// Calibrate per-domain thresholds and write thresholds.csv.
    Calibrate(Common),
    /// Score, calibrate, and evaluate; write the full results tree.
    Evaluate(Common),
    /// Re-render reports from a previously written cells file.
    Report {
        #[command(flatten)]
        common: Common,
        /// Cells file to render (defaults to `<output_dir>/cells.csv`).
        #[arg(long)]
        cells: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Validate(common) => {
            let config = common.load()?;
            let outcome = pipeline::run_validate(&config)?;
            println!(
                "{} documents ({} machine, {} human)",
                outcome.documents, outcome.profile.machine_total, outcome.profile.human_total
            );
            for (cell, count) in &outcome.profile.cells {
                println!("  {cell}: {count}");
            }
            for warning in outcome
                .integrity_warnings
                .iter()
                .chain(&outcome.profile.warnings)
            {
                eprintln!("warning: {warning}");
            }
        }
        Command::Attack(common) => {
            let config = common.load()?;
            let outcome = pipeline::run_attack(&config)?;
            for warning in &outcome.warnings {
                eprintln!("warning: {warning}");
            }
            println!(
                "wrote {} ({} attacked variants)",
                outcome.corpus_path.display(),
                outcome.generated
            );
        }
        Command::Calibrate(common) => {
            let config = common.load()?;
            let thresholds = pipeline::run_calibrate(&config)?;
            for t in &thresholds {
                let status = if t.converged { "converged" } else { "fallback" };
                println!(
                    "{}/{}: threshold {:.6} (FPR {:.4}, {} after {} iters)",
                    t.detector_id, t.domain, t.value, t.achieved_fpr, status, t.iterations_used
                );
            }
        }
        Command::Evaluate(common) => {
            let config = common.load()?;
            let outcome = pipeline::run_evaluate(&config)?;
            for warning in &outcome.results.warnings {
                eprintln!("warning: {warning}");
            }
            print!(
                "{}",
                mgtd_eval::report::render(
                    &outcome.table,
                    ReportFormat::Aligned,
                    outcome.results.ranking.as_ref()
                )
            );
            println!("axis: {}", enum_str(&outcome.results.axis));
            println!("results written to {}", config.output_dir.display());
        }
        Command::Report { common, cells } => {
            let config = common.load()?;
            let cells = cells.unwrap_or_else(|| config.output_dir.join("cells.csv"));
            for path in pipeline::run_report(&config, &cells)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}
