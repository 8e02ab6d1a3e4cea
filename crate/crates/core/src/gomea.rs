//! Gene-pool optimal mixing over template genotypes.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{scaled_fitness, Sample, Scale, ScaledFitness};
use crate::linkage::{
    build_linkage_tree, build_random_tree, capture_bias, count_frequencies, BiasCoefficients, EntropyTable,
    ErcBinTable, ErcStrategy, Fos, SquareMatrix,
};
use crate::model::{Budget, ConfigError, Elite, EvolutionaryRun, Model, RunResult};
use crate::tree::{init_half_and_half, semantic_change_check, Evaluator, GenotypeTree, SymbolSets, Template};

/// Which family of subsets drives variation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FosKind {
    /// Linkage tree over plain mutual information.
    LtMi,
    /// Linkage tree over bias-corrected mutual information.
    LtMib,
    /// Random tree.
    Rt,
}

/// Pairwise location similarity used for linkage trees and matrix dumps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Similarity {
    Mi,
    BiasedMi,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GomeaConfig {
    pub population_size: usize,
    pub height: usize,
    pub fos: FosKind,
    pub erc: ErcStrategy,
    /// Capacity `γ` of the constant bin table (bin-const only).
    pub bin_capacity: usize,
    /// Keep the bin table across generations instead of resetting it.
    pub persistent_bins: bool,
    pub sets: SymbolSets,
    pub budget: Budget,
    pub seed: u64,
}

impl GomeaConfig {
    /// LT over biased MI, all-const counting, `γ = 100`, no budget.
    pub fn new(sets: SymbolSets, height: usize, population_size: usize) -> Self {
        GomeaConfig {
            population_size,
            height,
            fos: FosKind::LtMib,
            erc: ErcStrategy::AllConst,
            bin_capacity: ErcBinTable::DEFAULT_CAPACITY,
            persistent_bins: false,
            sets,
            budget: Budget::default(),
            seed: 0,
        }
    }

    /// Checks everything except the budget.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population_size < 2 {
            return Err(ConfigError::new("population", "must be at least 2"));
        }
        if self.bin_capacity == 0 {
            return Err(ConfigError::new("bin_capacity", "must be positive"));
        }
        Ok(())
    }

    pub fn template(&self) -> Template {
        Template::new(self.height, self.sets.arity()).expect("symbol sets have positive arity")
    }
}

/// A genotype with its training fitness and linear scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub tree: GenotypeTree,
    pub fitness: f64,
    pub scale: Scale,
}

impl Solution {
    pub fn new(tree: GenotypeTree, fitness: ScaledFitness) -> Self {
        Solution {
            tree,
            fitness: if fitness.mse.is_nan() {
                f64::INFINITY
            } else {
                fitness.mse
            },
            scale: fitness.scale,
        }
    }

    pub fn to_elite(&self) -> Elite {
        Elite {
            model: Model::Template(self.tree.clone()),
            fitness: self.fitness,
            scale: self.scale,
        }
    }
}

/// Linearly-scaled MSE on a fixed sample, counting evaluations.
#[derive(Debug)]
pub struct TrainingObjective {
    sample: Arc<Sample>,
    evaluator: Evaluator,
    evaluations: u64,
}

impl TrainingObjective {
    pub fn new(sample: Arc<Sample>) -> Self {
        TrainingObjective {
            sample,
            evaluator: Evaluator::default(),
            evaluations: 0,
        }
    }

    pub fn sample(&self) -> &Sample {
        &self.sample
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn evaluate(&mut self, tree: &GenotypeTree) -> ScaledFitness {
        let p = self.evaluator.evaluate(tree, &self.sample.features);
        let fitness = self.score(&p);
        self.evaluator.recycle(p);
        fitness
    }

    /// Scores precomputed predictions; counts as one evaluation.
    pub fn score(&mut self, predictions: &[f64]) -> ScaledFitness {
        self.evaluations += 1;
        scaled_fitness(&self.sample.target, predictions)
    }
}

/// One FOS subset processed by [`gom_traced`].
#[derive(Clone, Debug)]
pub struct GomStep {
    pub subset: usize,
    pub donor: usize,
    /// Whether the fitness function was called.
    pub evaluated: bool,
    pub accepted: bool,
    pub before: Solution,
    pub after: Solution,
}

/// Gene-pool optimal mixing of one parent.
///
/// Subsets are visited in a fresh random order, the full location set is
/// skipped, and each subset copies from an independently drawn donor (which
/// may be the parent). Changes are kept iff fitness does not get worse; a
/// rejected change restores genotype, fitness and scaling exactly.
pub fn gom<R, F>(parent: &Solution, population: &[Solution], fos: &Fos, fitness: &mut F, rng: &mut R) -> Solution
where
    R: Rng + ?Sized,
    F: FnMut(&GenotypeTree) -> ScaledFitness,
{
    gom_impl(parent, population, fos, fitness, rng, None)
}

/// [`gom`] that also records every step.
pub fn gom_traced<R, F>(
    parent: &Solution,
    population: &[Solution],
    fos: &Fos,
    fitness: &mut F,
    rng: &mut R,
) -> (Solution, Vec<GomStep>)
where
    R: Rng + ?Sized,
    F: FnMut(&GenotypeTree) -> ScaledFitness,
{
    let mut steps = Vec::new();
    let offspring = gom_impl(parent, population, fos, fitness, rng, Some(&mut steps));
    (offspring, steps)
}

fn gom_impl<R, F>(
    parent: &Solution,
    population: &[Solution],
    fos: &Fos,
    fitness: &mut F,
    rng: &mut R,
    mut trace: Option<&mut Vec<GomStep>>,
) -> Solution
where
    R: Rng + ?Sized,
    F: FnMut(&GenotypeTree) -> ScaledFitness,
{
    let len = parent.tree.len();
    let mut offspring = parent.clone();
    let mut backup = parent.clone();
    let mut order: Vec<usize> = (0..fos.len()).collect();
    order.shuffle(rng);
    for subset_index in order {
        let subset = &fos.subsets()[subset_index];
        if subset.len() == len {
            continue;
        }
        let donor = rng.random_range(0..population.len());
        offspring.tree.copy_from(&population[donor].tree, subset);
        let evaluated = semantic_change_check(&backup.tree, &offspring.tree);
        let accepted = if evaluated {
            let candidate = Solution::new(offspring.tree.clone(), fitness(&offspring.tree));
            if candidate.fitness <= backup.fitness {
                offspring = candidate;
                true
            } else {
                offspring.tree.copy_from(&backup.tree, subset);
                false
            }
        } else {
            true
        };
        if let Some(steps) = trace.as_deref_mut() {
            steps.push(GomStep {
                subset: subset_index,
                donor,
                evaluated,
                accepted,
                before: backup.clone(),
                after: offspring.clone(),
            });
        }
        if accepted {
            backup.tree.copy_from(&offspring.tree, subset);
            backup.fitness = offspring.fitness;
            backup.scale = offspring.scale;
        }
    }
    offspring
}

/// Applies [`gom`] to every individual against the parent population and
/// returns the offspring, in order.
pub fn generation<R, F>(population: &[Solution], fos: &Fos, fitness: &mut F, rng: &mut R) -> Vec<Solution>
where
    R: Rng + ?Sized,
    F: FnMut(&GenotypeTree) -> ScaledFitness,
{
    population
        .iter()
        .map(|parent| gom(parent, population, fos, fitness, rng))
        .collect()
}

/// Whether all genotypes are identical, introns included.
pub fn has_converged(population: &[Solution]) -> bool {
    population
        .split_first()
        .is_none_or(|(first, rest)| rest.iter().all(|s| s.tree == first.tree))
}

/// Similarity between all location pairs of `population`.
///
/// # Panics
/// If `measure` is [`Similarity::BiasedMi`] and `bias` is `None`.
pub fn similarity_matrix(
    population: &[Solution],
    measure: Similarity,
    erc: ErcStrategy,
    bins: &mut ErcBinTable,
    bias: Option<&BiasCoefficients>,
) -> SquareMatrix {
    let model = count_frequencies(population.iter().map(|s| &s.tree), erc, bins);
    let table = EntropyTable::new(&model);
    match measure {
        Similarity::Mi => table.mutual_information(),
        Similarity::BiasedMi => table.biased_mutual_information(bias.expect("biased MI needs captured coefficients")),
    }
}

/// Builds the FOS of one generation.
pub fn learn_fos<R: Rng + ?Sized>(
    population: &[Solution],
    kind: FosKind,
    erc: ErcStrategy,
    bins: &mut ErcBinTable,
    bias: Option<&BiasCoefficients>,
    rng: &mut R,
) -> Fos {
    let measure = match kind {
        FosKind::Rt => return build_random_tree(rng, population[0].tree.len()),
        FosKind::LtMi => Similarity::Mi,
        FosKind::LtMib => Similarity::BiasedMi,
    };
    let matrix = similarity_matrix(population, measure, erc, bins, bias);
    build_linkage_tree(&matrix).expect("entropies are finite")
}

/// A GOMEA run that can be stepped one generation at a time.
#[derive(Debug)]
pub struct GomeaRun {
    config: GomeaConfig,
    template: Template,
    population: Vec<Solution>,
    bias: Option<BiasCoefficients>,
    bins: ErcBinTable,
    objective: TrainingObjective,
    rng: ChaCha8Rng,
    generations: usize,
    best: Solution,
    trace: Vec<f64>,
}

impl GomeaRun {
    /// Initializes and evaluates a Half-and-Half population on `train`.
    pub fn new(config: &GomeaConfig, train: Arc<Sample>) -> Result<Self, ConfigError> {
        config.validate()?;
        if config.sets.n_features() != train.features.n_cols() {
            return Err(ConfigError::new(
                "dataset",
                format!(
                    "has {} features, symbol sets expect {}",
                    train.features.n_cols(),
                    config.sets.n_features()
                ),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let template = config.template();
        let mut objective = TrainingObjective::new(train);
        let population = random_population(config, template, &mut objective, &mut rng);
        let best = best_of(&population).clone();
        let mut run = GomeaRun {
            config: config.clone(),
            template,
            population,
            bias: None,
            bins: ErcBinTable::new(config.bin_capacity),
            objective,
            rng,
            generations: 0,
            best,
            trace: Vec::new(),
        };
        run.capture();
        Ok(run)
    }

    // Captured for every FOS kind so biased matrices can always be inspected.
    fn capture(&mut self) {
        self.bins.clear();
        let model = count_frequencies(self.population.iter().map(|s| &s.tree), self.config.erc, &mut self.bins);
        self.bias = Some(capture_bias(&model));
    }

    /// Replaces the population with a fresh random one and recaptures the
    /// bias coefficients. The all-time best is kept.
    pub fn reinitialize(&mut self) {
        self.population = random_population(&self.config, self.template, &mut self.objective, &mut self.rng);
        self.bins.clear();
        self.capture();
        self.update_best();
    }

    fn update_best(&mut self) {
        let candidate = best_of(&self.population);
        if candidate.fitness < self.best.fitness {
            self.best = candidate.clone();
        }
    }

    /// Similarity matrix of the current population.
    pub fn similarity_matrix(&mut self, measure: Similarity) -> SquareMatrix {
        if !self.config.persistent_bins {
            self.bins.clear();
        }
        similarity_matrix(
            &self.population,
            measure,
            self.config.erc,
            &mut self.bins,
            self.bias.as_ref(),
        )
    }

    pub fn population(&self) -> &[Solution] {
        &self.population
    }

    pub fn best_solution(&self) -> &Solution {
        &self.best
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn template(&self) -> Template {
        self.template
    }
}

impl EvolutionaryRun for GomeaRun {
    fn step(&mut self) {
        if !self.config.persistent_bins {
            self.bins.clear();
        }
        let fos = learn_fos(
            &self.population,
            self.config.fos,
            self.config.erc,
            &mut self.bins,
            self.bias.as_ref(),
            &mut self.rng,
        );
        let objective = &mut self.objective;
        let mut fitness = |t: &GenotypeTree| objective.evaluate(t);
        self.population = generation(&self.population, &fos, &mut fitness, &mut self.rng);
        self.generations += 1;
        self.update_best();
        self.trace.push(self.best.fitness);
    }

    fn generations(&self) -> usize {
        self.generations
    }

    fn population_size(&self) -> usize {
        self.population.len()
    }

    fn evaluations(&self) -> u64 {
        self.objective.evaluations()
    }

    fn best_fitness(&self) -> f64 {
        self.best.fitness
    }

    fn best(&self) -> Elite {
        self.best.to_elite()
    }

    fn has_converged(&self) -> bool {
        has_converged(&self.population)
    }
}

fn random_population<R: Rng + ?Sized>(
    config: &GomeaConfig,
    template: Template,
    objective: &mut TrainingObjective,
    rng: &mut R,
) -> Vec<Solution> {
    (0..config.population_size)
        .map(|_| {
            let tree = init_half_and_half(rng, template, &config.sets);
            let fitness = objective.evaluate(&tree);
            Solution::new(tree, fitness)
        })
        .collect()
}

/// First individual with minimal fitness.
fn best_of(population: &[Solution]) -> &Solution {
    population
        .iter()
        .reduce(|best, s| if s.fitness < best.fitness { s } else { best })
        .expect("population is not empty")
}

/// Runs GOMEA on `train` until the budget is spent.
///
/// Under a wall-clock budget a converged population is re-initialized.
pub fn run_gomea(config: &GomeaConfig, train: Arc<Sample>) -> Result<RunResult, ConfigError> {
    if config.budget.is_empty() {
        return Err(ConfigError::new("budget", "set generations or seconds"));
    }
    let start = Instant::now();
    let mut run = GomeaRun::new(config, train)?;
    while !config.budget.exhausted(run.generations(), start.elapsed()) {
        if config.budget.seconds.is_some() && run.has_converged() {
            run.reinitialize();
        }
        run.step();
    }
    Ok(RunResult {
        best: run.best(),
        trace: run.trace,
        evaluations: run.objective.evaluations(),
        generations: run.generations,
        elapsed: start.elapsed(),
    })
}
