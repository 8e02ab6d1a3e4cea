//! Experiment orchestration: configuration, repetitions, result files and
//! summaries.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::data::{self, load_csv, DataError, Dataset, Sample};
use crate::gomea::{run_gomea, FosKind, GomeaConfig, GomeaRun, Similarity};
use crate::gptrad::{run_gptrad, LimitKind, TradConfig, TradRun};
use crate::ims::{ImsConfig, ImsError, ImsScheduler};
use crate::linkage::{ErcBinTable, ErcStrategy, SquareMatrix};
use crate::model::{derive_seed, Budget, ConfigError, Elite, EvolutionaryRun};
use crate::tree::{ErcRange, SymbolSets};

/// Role tags mixed into per-repetition seeds.
pub const SPLIT_ROLE: u64 = 1;
pub const RUN_ROLE: u64 = 2;

pub const RESULTS_HEADER: [&str; 11] = [
    "run_id",
    "seed",
    "algo",
    "dataset",
    "split_seed",
    "train_nmse",
    "val_nmse",
    "test_nmse",
    "evaluations",
    "elapsed_s",
    "expression",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Ims(#[from] ImsError),
    #[error("cannot read config {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}")]
    Thread(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    GomeaLtMib,
    GomeaLtMi,
    GomeaRt,
    GptradH,
    GptradL,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::GomeaLtMib,
        Algorithm::GomeaLtMi,
        Algorithm::GomeaRt,
        Algorithm::GptradH,
        Algorithm::GptradL,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::GomeaLtMib => "gomea-lt-mib",
            Algorithm::GomeaLtMi => "gomea-lt-mi",
            Algorithm::GomeaRt => "gomea-rt",
            Algorithm::GptradH => "gptrad-h",
            Algorithm::GptradL => "gptrad-l",
        }
    }

    pub fn fos(self) -> Option<FosKind> {
        match self {
            Algorithm::GomeaLtMib => Some(FosKind::LtMib),
            Algorithm::GomeaLtMi => Some(FosKind::LtMi),
            Algorithm::GomeaRt => Some(FosKind::Rt),
            Algorithm::GptradH | Algorithm::GptradL => None,
        }
    }
}

impl FromStr for Algorithm {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| ConfigError::new("algorithm", format!("unknown algorithm `{s}`")))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether an ERC terminal exists and how constants are counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErcSetting {
    None,
    All,
    No,
    Bin,
}

impl ErcSetting {
    pub fn strategy(self) -> Option<ErcStrategy> {
        match self {
            ErcSetting::None => None,
            ErcSetting::All => Some(ErcStrategy::AllConst),
            ErcSetting::No => Some(ErcStrategy::NoConst),
            ErcSetting::Bin => Some(ErcStrategy::BinConst),
        }
    }
}

impl FromStr for ErcSetting {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "none" => Ok(ErcSetting::None),
            "all" => Ok(ErcSetting::All),
            "no" => Ok(ErcSetting::No),
            "bin" => Ok(ErcSetting::Bin),
            _ => Err(ConfigError::new(
                "erc",
                format!("expected none, all, no or bin, got `{s}`"),
            )),
        }
    }
}

/// Every configuration key, all optional. Parsed from a flat TOML file and
/// from command-line flags, then layered with [`ConfigLayer::over`].
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub dataset: Option<PathBuf>,
    pub algorithm: Option<String>,
    pub erc: Option<String>,
    pub height: Option<usize>,
    pub population: Option<usize>,
    pub ims_cadence: Option<usize>,
    pub ims_base_population: Option<usize>,
    pub generations: Option<usize>,
    pub seconds: Option<f64>,
    pub repetitions: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub bin_capacity: Option<usize>,
    pub persistent_bins: Option<bool>,
}

impl ConfigLayer {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ConfigLayer::from_toml(&text).map_err(|e| HarnessError::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// `self` with every key set in `top` replaced by `top`'s value.
    pub fn over(self, top: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            dataset: top.dataset.or(self.dataset),
            algorithm: top.algorithm.or(self.algorithm),
            erc: top.erc.or(self.erc),
            height: top.height.or(self.height),
            population: top.population.or(self.population),
            ims_cadence: top.ims_cadence.or(self.ims_cadence),
            ims_base_population: top.ims_base_population.or(self.ims_base_population),
            generations: top.generations.or(self.generations),
            seconds: top.seconds.or(self.seconds),
            repetitions: top.repetitions.or(self.repetitions),
            seed: top.seed.or(self.seed),
            output: top.output.or(self.output),
            jobs: top.jobs.or(self.jobs),
            bin_capacity: top.bin_capacity.or(self.bin_capacity),
            persistent_bins: top.persistent_bins.or(self.persistent_bins),
        }
    }
}

/// Fixed population or interleaved multistart.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sizing {
    Fixed(usize),
    Ims { cadence: usize, base_population: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub algorithm: Algorithm,
    pub erc: ErcSetting,
    pub height: usize,
    pub sizing: Sizing,
    /// Per run, or for the whole scheme under IMS.
    pub budget: Budget,
    pub repetitions: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Worker threads for repetitions; 0 picks the machine default.
    pub jobs: usize,
    pub bin_capacity: usize,
    pub persistent_bins: bool,
}

impl ExperimentConfig {
    pub const DEFAULT_HEIGHT: usize = 4;

    /// Applies defaults and validates. Errors name the offending key.
    pub fn resolve(layer: ConfigLayer) -> Result<Self, ConfigError> {
        let dataset = layer
            .dataset
            .ok_or_else(|| ConfigError::new("dataset", "is required"))?;
        let algorithm: Algorithm = layer.algorithm.as_deref().unwrap_or("gomea-lt-mib").parse()?;
        let erc: ErcSetting = layer.erc.as_deref().unwrap_or("none").parse()?;
        let sizing = match (layer.population, layer.ims_cadence, layer.ims_base_population) {
            (Some(n), None, None) => Sizing::Fixed(n),
            (None, Some(cadence), Some(base_population)) => Sizing::Ims {
                cadence,
                base_population,
            },
            (None, None, None) => {
                return Err(ConfigError::new(
                    "population",
                    "set either population or ims_cadence with ims_base_population",
                ))
            }
            (Some(_), _, _) => {
                return Err(ConfigError::new(
                    "population",
                    "cannot be combined with ims_cadence or ims_base_population",
                ))
            }
            (None, None, Some(_)) => {
                return Err(ConfigError::new("ims_cadence", "is required with ims_base_population"))
            }
            (None, Some(_), None) => {
                return Err(ConfigError::new("ims_base_population", "is required with ims_cadence"))
            }
        };
        match sizing {
            Sizing::Fixed(n) if n < 2 => return Err(ConfigError::new("population", "must be at least 2")),
            Sizing::Ims { cadence: 0, .. } => return Err(ConfigError::new("ims_cadence", "must be at least 1")),
            Sizing::Ims { base_population, .. } if base_population < 2 => {
                return Err(ConfigError::new("ims_base_population", "must be at least 2"))
            }
            _ => {}
        }
        if let Some(s) = layer.seconds {
            if !(s.is_finite() && s > 0.0) {
                return Err(ConfigError::new("seconds", "must be a positive number"));
            }
        }
        let budget = Budget {
            generations: layer.generations,
            seconds: layer.seconds,
        };
        if budget.is_empty() {
            return Err(ConfigError::new("generations", "set generations or seconds"));
        }
        let height = layer.height.unwrap_or(Self::DEFAULT_HEIGHT);
        if algorithm.fos().is_none() && height < 2 {
            return Err(ConfigError::new("height", "must be at least 2 for tree-based GP"));
        }
        let repetitions = layer.repetitions.unwrap_or(1);
        if repetitions == 0 {
            return Err(ConfigError::new("repetitions", "must be at least 1"));
        }
        let bin_capacity = layer.bin_capacity.unwrap_or(ErcBinTable::DEFAULT_CAPACITY);
        if bin_capacity == 0 {
            return Err(ConfigError::new("bin_capacity", "must be positive"));
        }
        Ok(ExperimentConfig {
            dataset,
            algorithm,
            erc,
            height,
            sizing,
            budget,
            repetitions,
            seed: layer.seed.unwrap_or(0),
            output: layer.output,
            jobs: layer.jobs.unwrap_or(0),
            bin_capacity,
            persistent_bins: layer.persistent_bins.unwrap_or(false),
        })
    }

    pub fn split_seed(&self, repetition: usize) -> u64 {
        derive_seed(self.seed, repetition as u64, SPLIT_ROLE)
    }

    pub fn run_seed(&self, repetition: usize) -> u64 {
        derive_seed(self.seed, repetition as u64, RUN_ROLE)
    }

    fn gomea_config(&self, sets: SymbolSets, fos: FosKind, population: usize, seed: u64) -> GomeaConfig {
        let mut c = GomeaConfig::new(sets, self.height, population);
        c.fos = fos;
        c.erc = self.erc.strategy().unwrap_or(ErcStrategy::AllConst);
        c.bin_capacity = self.bin_capacity;
        c.persistent_bins = self.persistent_bins;
        c.budget = self.budget;
        c.seed = seed;
        c
    }

    fn trad_config(&self, sets: SymbolSets, population: usize, seed: u64) -> TradConfig {
        let kind = match self.algorithm {
            Algorithm::GptradH => LimitKind::Height,
            _ => LimitKind::Nodes,
        };
        let mut c = TradConfig::new(sets, kind, self.height, population);
        c.budget = self.budget;
        c.seed = seed;
        c
    }
}

/// One row of the results file.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub seed: u64,
    pub algo: String,
    pub dataset: String,
    pub split_seed: u64,
    pub train_nmse: f64,
    pub val_nmse: f64,
    pub test_nmse: f64,
    pub evaluations: u64,
    pub elapsed_s: f64,
    /// Unscaled infix form of the returned model.
    pub expression: String,
}

/// Train/validation/test samples of one repetition.
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Arc<Sample>,
    pub validation: Sample,
    pub test: Sample,
}

pub fn make_splits(dataset: &Dataset, split_seed: u64) -> Result<Splits, DataError> {
    let idx = data::split(dataset.n_rows(), &mut ChaCha8Rng::seed_from_u64(split_seed))?;
    Ok(Splits {
        train: Arc::new(dataset.select(&idx.train)),
        validation: dataset.select(&idx.validation),
        test: dataset.select(&idx.test),
    })
}

fn symbol_sets(config: &ExperimentConfig, train: &Sample) -> Result<SymbolSets, ConfigError> {
    let erc = match config.erc {
        ErcSetting::None => None,
        _ => ErcRange::from_features(&train.features),
    };
    SymbolSets::standard(train.features.n_cols(), erc).map_err(|e| ConfigError::new("dataset", e.to_string()))
}

/// Runs the configured algorithm on one split; returns the chosen model and
/// the evaluations spent.
pub fn run_algorithm(config: &ExperimentConfig, splits: &Splits, seed: u64) -> Result<(Elite, u64), HarnessError> {
    let sets = symbol_sets(config, &splits.train)?;
    match config.sizing {
        Sizing::Fixed(n) => {
            let result = match config.algorithm.fos() {
                Some(fos) => run_gomea(&config.gomea_config(sets, fos, n, seed), splits.train.clone())?,
                None => run_gptrad(&config.trad_config(sets, n, seed), splits.train.clone())?,
            };
            Ok((result.best, result.evaluations))
        }
        Sizing::Ims {
            cadence,
            base_population,
        } => {
            let ims = ImsConfig {
                cadence,
                base_population,
                budget: config.budget,
                seed,
            };
            // validate the per-run configuration once, before any run exists
            match config.algorithm.fos() {
                Some(fos) => config
                    .gomea_config(sets.clone(), fos, base_population, seed)
                    .validate()?,
                None => config.trad_config(sets.clone(), base_population, seed).validate()?,
            }
            let train = splits.train.clone();
            let factory = |spec: crate::ims::RunSpec| -> Box<dyn EvolutionaryRun> {
                match config.algorithm.fos() {
                    Some(fos) => {
                        let c = config.gomea_config(sets.clone(), fos, spec.population_size, spec.seed);
                        Box::new(GomeaRun::new(&c, train.clone()).expect("validated above"))
                    }
                    None => {
                        let c = config.trad_config(sets.clone(), spec.population_size, spec.seed);
                        Box::new(TradRun::new(&c, train.clone()).expect("validated above"))
                    }
                }
            };
            let mut scheduler = ImsScheduler::new(ims, factory)?;
            scheduler.run();
            let entry = scheduler.finalize(&splits.validation)?;
            Ok((entry.elite, scheduler.evaluations()))
        }
    }
}

/// Executes one repetition end to end.
pub fn run_repetition(
    config: &ExperimentConfig,
    dataset: &Dataset,
    repetition: usize,
) -> Result<RunRecord, HarnessError> {
    let split_seed = config.split_seed(repetition);
    let seed = config.run_seed(repetition);
    let splits = make_splits(dataset, split_seed)?;
    let start = Instant::now();
    let (elite, evaluations) = run_algorithm(config, &splits, seed)?;
    let elapsed = start.elapsed();
    let nmse_on = |s: &Sample| data::nmse(&s.target, &elite.model.evaluate(&s.features));
    Ok(RunRecord {
        run_id: repetition,
        seed,
        algo: config.algorithm.to_string(),
        dataset: dataset.name.clone(),
        split_seed,
        train_nmse: nmse_on(&splits.train)?,
        val_nmse: nmse_on(&splits.validation)?,
        test_nmse: nmse_on(&splits.test)?,
        evaluations,
        elapsed_s: elapsed.as_secs_f64(),
        expression: elite.model.to_infix(),
    })
}

/// All repetitions on an already loaded dataset, in repetition order.
pub fn run_experiment_on(config: &ExperimentConfig, dataset: &Dataset) -> Result<Vec<RunRecord>, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| HarnessError::Thread(e.to_string()))?;
    pool.install(|| {
        (0..config.repetitions)
            .into_par_iter()
            .map(|rep| run_repetition(config, dataset, rep))
            .collect()
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>, HarnessError> {
    let dataset = load_csv(&config.dataset)?;
    run_experiment_on(config, &dataset)
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes records as CSV; floats carry 17 significant digits.
pub fn write_results<W: Write>(records: &[RunRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        w.write_record([
            r.run_id.to_string(),
            r.seed.to_string(),
            r.algo.clone(),
            r.dataset.clone(),
            r.split_seed.to_string(),
            float(r.train_nmse),
            float(r.val_nmse),
            float(r.test_nmse),
            r.evaluations.to_string(),
            float(r.elapsed_s),
            r.expression.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_results(records: &[RunRecord], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_results(records, std::io::BufWriter::new(file)).map_err(|source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<RunRecord>, HarnessError> {
    let path = path.as_ref();
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    reader.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

/// First quartile, median and third quartile with linear interpolation
/// between order statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Quantile `q ∈ [0, 1]` of sorted data, interpolating at rank `q·(n−1)`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

pub fn quartiles(values: &[f64]) -> Quartiles {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Quartiles {
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
    }
}

pub fn median(values: &[f64]) -> f64 {
    quartiles(values).median
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub algo: String,
    pub dataset: String,
    pub runs: usize,
    pub train: Quartiles,
    pub validation: Quartiles,
    pub test: Quartiles,
}

/// One summary per (dataset, algorithm), sorted by dataset then algorithm.
pub fn summarize(records: &[RunRecord]) -> Vec<Summary> {
    let mut groups: std::collections::BTreeMap<(String, String), Vec<&RunRecord>> = Default::default();
    for r in records {
        groups.entry((r.dataset.clone(), r.algo.clone())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((dataset, algo), rs)| {
            let col = |f: fn(&RunRecord) -> f64| quartiles(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            Summary {
                algo,
                dataset,
                runs: rs.len(),
                train: col(|r| r.train_nmse),
                validation: col(|r| r.val_nmse),
                test: col(|r| r.test_nmse),
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(summaries: &[Summary], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dataset",
        "algo",
        "runs",
        "train_median",
        "train_iqr",
        "val_median",
        "val_iqr",
        "test_median",
        "test_iqr",
    ])?;
    for s in summaries {
        w.write_record([
            s.dataset.clone(),
            s.algo.clone(),
            s.runs.to_string(),
            float(s.train.median),
            float(s.train.iqr()),
            float(s.validation.median),
            float(s.validation.iqr()),
            float(s.test.median),
            float(s.test.iqr()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Similarity matrix of the population at `generation` (1 = initial) of the
/// first repetition's GOMEA run on `dataset`.
///
/// `measure` defaults to biased MI for `gomea-lt-mib` and plain MI otherwise.
pub fn similarity_matrix_on(
    config: &ExperimentConfig,
    dataset: &Dataset,
    generation: usize,
    measure: Option<Similarity>,
) -> Result<SquareMatrix, HarnessError> {
    let fos = config
        .algorithm
        .fos()
        .ok_or_else(|| ConfigError::new("algorithm", "similarity matrices need a GOMEA algorithm"))?;
    let Sizing::Fixed(population) = config.sizing else {
        return Err(ConfigError::new("population", "similarity matrices need a fixed population").into());
    };
    if generation == 0 {
        return Err(ConfigError::new("generation", "counts from 1").into());
    }
    let splits = make_splits(dataset, config.split_seed(0))?;
    let sets = symbol_sets(config, &splits.train)?;
    let gomea = config.gomea_config(sets, fos, population, config.run_seed(0));
    let mut run = GomeaRun::new(&gomea, splits.train)?;
    for _ in 1..generation {
        run.step();
    }
    let measure = measure.unwrap_or(match fos {
        FosKind::LtMib => Similarity::BiasedMi,
        _ => Similarity::Mi,
    });
    Ok(run.similarity_matrix(measure))
}

/// Writes [`similarity_matrix_on`] for the configured dataset to `path`.
pub fn dump_similarity_matrix(
    config: &ExperimentConfig,
    generation: usize,
    measure: Option<Similarity>,
    path: impl AsRef<Path>,
) -> Result<SquareMatrix, HarnessError> {
    let dataset = load_csv(&config.dataset)?;
    let matrix = similarity_matrix_on(config, &dataset, generation, measure)?;
    let path = path.as_ref();
    std::fs::write(path, matrix.to_csv()).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureMatrix;

    fn layer(text: &str) -> ConfigLayer {
        ConfigLayer::from_toml(text).unwrap()
    }

    fn base() -> ConfigLayer {
        layer("dataset = \"d.csv\"\npopulation = 20\ngenerations = 2\n")
    }

    fn dataset() -> Dataset {
        let x0: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let x1: Vec<f64> = (0..40).map(|i| ((i * 13) % 7) as f64).collect();
        let y = x0.iter().zip(&x1).map(|(a, b)| a * b + 1.0).collect();
        Dataset::new("toy", FeatureMatrix::from_columns(vec![x0, x1]).unwrap(), y).unwrap()
    }

    #[test]
    fn defaults_and_precedence() {
        let c = ExperimentConfig::resolve(base()).unwrap();
        assert_eq!(c.algorithm, Algorithm::GomeaLtMib);
        assert_eq!(c.erc, ErcSetting::None);
        assert_eq!(c.height, 4);
        assert_eq!(c.repetitions, 1);
        let cli = ConfigLayer {
            height: Some(3),
            algorithm: Some("gptrad-l".into()),
            ..Default::default()
        };
        let c = ExperimentConfig::resolve(base().over(cli)).unwrap();
        assert_eq!(c.height, 3);
        assert_eq!(c.algorithm, Algorithm::GptradL);
        assert_eq!(c.sizing, Sizing::Fixed(20));
    }

    #[test]
    fn errors_name_the_field() {
        let field = |extra: &str| {
            let l = layer(&format!("dataset = \"d.csv\"\n{extra}"));
            ExperimentConfig::resolve(l).unwrap_err().field
        };
        assert_eq!(field("generations = 1"), "population");
        assert_eq!(
            field("population = 5\nims_cadence = 4\nims_base_population = 5\ngenerations = 1"),
            "population"
        );
        assert_eq!(field("ims_cadence = 4\ngenerations = 1"), "ims_base_population");
        assert_eq!(field("population = 5"), "generations");
        assert_eq!(
            field("population = 5\ngenerations = 1\nalgorithm = \"ga\""),
            "algorithm"
        );
        assert_eq!(field("population = 5\ngenerations = 1\nerc = \"some\""), "erc");
        assert_eq!(field("population = 5\nseconds = -1.0"), "seconds");
        assert_eq!(
            ExperimentConfig::resolve(layer("population = 5\ngenerations = 1"))
                .unwrap_err()
                .field,
            "dataset"
        );
        assert!(ConfigLayer::from_toml("populaton = 3").is_err());
    }

    #[test]
    fn seeds_are_shared_across_algorithms() {
        let a = ExperimentConfig::resolve(base()).unwrap();
        let b = ExperimentConfig::resolve(base().over(layer("algorithm = \"gomea-rt\""))).unwrap();
        for rep in 0..5 {
            assert_eq!(a.split_seed(rep), b.split_seed(rep));
        }
        assert_ne!(a.split_seed(0), a.split_seed(1));
        assert_ne!(a.split_seed(0), a.run_seed(0));
    }

    #[test]
    fn quantiles_interpolate() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let q = quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!((q.q1, q.q3), (2.0, 4.0));
        let q = quartiles(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!((q.q1, q.q3), (1.75, 3.25));
    }

    #[test]
    fn every_algorithm_runs() {
        let d = dataset();
        for algo in Algorithm::ALL {
            for sizing in ["population = 20", "ims_cadence = 2\nims_base_population = 4"] {
                let l = layer(&format!(
                    "dataset = \"d.csv\"\nheight = 2\ngenerations = 4\nerc = \"bin\"\nalgorithm = \"{algo}\"\n{sizing}"
                ));
                let c = ExperimentConfig::resolve(l).unwrap();
                let r = run_repetition(&c, &d, 0).unwrap();
                assert!(r.train_nmse >= 0.0 && r.val_nmse >= 0.0 && r.test_nmse >= 0.0);
                assert_eq!(r.algo, algo.as_str());
                let again = run_repetition(&c, &d, 0).unwrap();
                assert_eq!(
                    (&r.expression, r.test_nmse.to_bits()),
                    (&again.expression, again.test_nmse.to_bits())
                );
            }
        }
    }

    #[test]
    fn results_roundtrip() {
        let c = ExperimentConfig::resolve(base().over(layer("repetitions = 2\nheight = 2"))).unwrap();
        let records = run_experiment_on(&c, &dataset()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[1].run_id, 1);
        let mut a = Vec::new();
        write_results(&records, &mut a).unwrap();
        let mut b = Vec::new();
        write_results(&records, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("run_id,seed,algo,dataset,split_seed,train_nmse"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        emit_results(&records, &path).unwrap();
        assert_eq!(read_results(&path).unwrap(), records);
        let s = summarize(&records);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].runs, 2);
    }

    #[test]
    fn matrix_dump_shapes() {
        let c = ExperimentConfig::resolve(base().over(layer("height = 2"))).unwrap();
        let m = similarity_matrix_on(&c, &dataset(), 1, None).unwrap();
        assert_eq!(m.size(), 7);
        assert!(m.is_symmetric());
        let c = ExperimentConfig::resolve(base().over(layer("algorithm = \"gptrad-h\""))).unwrap();
        assert!(similarity_matrix_on(&c, &dataset(), 1, None).is_err());
    }
}
