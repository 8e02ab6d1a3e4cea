use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gpgomea::gomea::Similarity;
use gpgomea::harness::{self, ConfigLayer, ExperimentConfig};

#[derive(Parser)]
#[command(name = "gpgomea", version, about = "Symbolic regression experiments with GP-GOMEA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every repetition of an experiment and write the results CSV.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Median and IQR of the NMSE columns per dataset and algorithm.
    Summarize {
        /// Results CSV written by `run`.
        results: PathBuf,
        /// Write here instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Write the location similarity matrix of one generation as CSV.
    DumpMi {
        #[command(flatten)]
        config: ConfigArgs,
        /// Generation to inspect; 1 is the initial population.
        #[arg(long, default_value_t = 1)]
        generation: usize,
        /// Defaults to biased MI for gomea-lt-mib and plain MI otherwise.
        #[arg(long, value_enum)]
        measure: Option<Measure>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Measure {
    Mi,
    BiasedMi,
}

/// Flags mirror the configuration file keys and take precedence over them.
#[derive(Args)]
struct ConfigArgs {
    /// Flat TOML file with any of the keys below.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// gomea-lt-mib, gomea-lt-mi, gomea-rt, gptrad-h or gptrad-l.
    #[arg(long)]
    algorithm: Option<String>,
    /// none, all, no or bin.
    #[arg(long)]
    erc: Option<String>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    ims_cadence: Option<usize>,
    #[arg(long)]
    ims_base_population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    seconds: Option<f64>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    bin_capacity: Option<usize>,
    #[arg(long)]
    persistent_bins: Option<bool>,
}

impl ConfigArgs {
    fn resolve(self) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(path) => ConfigLayer::from_file(path)?,
            None => ConfigLayer::default(),
        };
        let flags = ConfigLayer {
            dataset: self.dataset,
            algorithm: self.algorithm,
            erc: self.erc,
            height: self.height,
            population: self.population,
            ims_cadence: self.ims_cadence,
            ims_base_population: self.ims_base_population,
            generations: self.generations,
            seconds: self.seconds,
            repetitions: self.repetitions,
            seed: self.seed,
            output: self.output,
            jobs: self.jobs,
            bin_capacity: self.bin_capacity,
            persistent_bins: self.persistent_bins,
        };
        Ok(ExperimentConfig::resolve(file.over(flags))?)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config } => {
            let config = config.resolve()?;
            let records = harness::run_experiment(&config)?;
            match &config.output {
                Some(path) => harness::emit_results(&records, path)?,
                None => harness::write_results(&records, std::io::stdout().lock())?,
            }
        }
        Command::Summarize { results, output } => {
            let records = harness::read_results(&results)?;
            anyhow::ensure!(!records.is_empty(), "{} has no records", results.display());
            let summaries = harness::summarize(&records);
            match output {
                Some(path) => {
                    let file = std::fs::File::create(&path).with_context(|| path.display().to_string())?;
                    harness::write_summary(&summaries, file)?;
                }
                None => harness::write_summary(&summaries, std::io::stdout().lock())?,
            }
        }
        Command::DumpMi {
            config,
            generation,
            measure,
        } => {
            let config = config.resolve()?;
            let measure = measure.map(|m| match m {
                Measure::Mi => Similarity::Mi,
                Measure::BiasedMi => Similarity::BiasedMi,
            });
            match config.output.clone() {
                Some(path) => {
                    harness::dump_similarity_matrix(&config, generation, measure, path)?;
                }
                None => {
                    let dataset = gpgomea::data::load_csv(&config.dataset)?;
                    let m = harness::similarity_matrix_on(&config, &dataset, generation, measure)?;
                    std::io::stdout().lock().write_all(m.to_csv().as_bytes())?;
                }
            }
        }
    }
    Ok(())
}
