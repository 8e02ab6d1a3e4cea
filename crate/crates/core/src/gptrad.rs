//! Tree-based GP baseline: variable-shape trees, tournament selection,
//! subtree crossover and subtree mutation under a size limit.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{FeatureMatrix, Sample, Scale};
use crate::gomea::TrainingObjective;
use crate::model::{Budget, ConfigError, Elite, EvolutionaryRun, Model, RunResult};
use crate::tree::{template_size, Op, Symbol, SymbolSets};

/// A tree of any shape, stored as symbols in prefix order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableTree {
    nodes: Vec<Symbol>,
}

impl VariableTree {
    /// `None` unless `nodes` is exactly one complete prefix expression.
    pub fn from_prefix(nodes: Vec<Symbol>) -> Option<Self> {
        let mut open = 1usize;
        for (i, s) in nodes.iter().enumerate() {
            if open == 0 {
                return None;
            }
            open = open - 1 + s.arity();
            if let Symbol::Constant(c) = s {
                if !c.is_finite() {
                    return None;
                }
            }
            if open == 0 && i + 1 != nodes.len() {
                return None;
            }
        }
        (open == 0).then_some(VariableTree { nodes })
    }

    pub fn nodes(&self) -> &[Symbol] {
        &self.nodes
    }

    /// Node count.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// One past the last node of the subtree rooted at `i`.
    pub fn subtree_end(&self, i: usize) -> usize {
        let mut open = 1usize;
        let mut j = i;
        while open > 0 {
            open = open - 1 + self.nodes[j].arity();
            j += 1;
        }
        j
    }

    /// Depth of every node; the root has depth 0.
    pub fn depths(&self) -> Vec<usize> {
        let mut depths = Vec::with_capacity(self.nodes.len());
        // remaining child slots per open ancestor
        let mut stack: Vec<usize> = Vec::new();
        for s in &self.nodes {
            depths.push(stack.len());
            if let Some(top) = stack.last_mut() {
                *top -= 1;
            }
            if s.arity() > 0 {
                stack.push(s.arity());
            }
            while stack.last() == Some(&0) {
                stack.pop();
            }
        }
        depths
    }

    /// Length of the longest root-to-leaf path, in edges.
    pub fn height(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    /// Copy with the subtree at `at` replaced by `with`.
    pub fn replace_subtree(&self, at: usize, with: &[Symbol]) -> VariableTree {
        let end = self.subtree_end(at);
        let mut nodes = Vec::with_capacity(self.nodes.len() - (end - at) + with.len());
        nodes.extend_from_slice(&self.nodes[..at]);
        nodes.extend_from_slice(with);
        nodes.extend_from_slice(&self.nodes[end..]);
        VariableTree { nodes }
    }

    pub fn subtree(&self, at: usize) -> &[Symbol] {
        &self.nodes[at..self.subtree_end(at)]
    }

    pub fn evaluate(&self, x: &FeatureMatrix) -> Vec<f64> {
        self.eval_from(0, x).0
    }

    fn eval_from(&self, i: usize, x: &FeatureMatrix) -> (Vec<f64>, usize) {
        match self.nodes[i] {
            Symbol::Feature(j) => (x.column(j).to_vec(), i + 1),
            Symbol::Constant(c) => (vec![c; x.n_rows()], i + 1),
            Symbol::Function(op) => {
                let (mut a, next) = self.eval_from(i + 1, x);
                if op.arity() == 1 {
                    a.iter_mut().for_each(|v| *v = op.apply(&[*v]));
                    (a, next)
                } else {
                    let (b, next) = self.eval_from(next, x);
                    a.iter_mut().zip(&b).for_each(|(u, v)| *u = op.apply(&[*u, *v]));
                    (a, next)
                }
            }
        }
    }

    /// Same rendering as template genotypes.
    pub fn to_infix(&self) -> String {
        let mut out = String::new();
        self.write_infix(0, &mut out);
        out
    }

    fn write_infix(&self, i: usize, out: &mut String) -> usize {
        use std::fmt::Write;
        match self.nodes[i] {
            Symbol::Feature(j) => {
                write!(out, "x{j}").unwrap();
                i + 1
            }
            Symbol::Constant(c) => {
                write!(out, "{c}").unwrap();
                i + 1
            }
            Symbol::Function(op) => match op {
                Op::Add | Op::Sub | Op::Mul => {
                    out.push('(');
                    let next = self.write_infix(i + 1, out);
                    write!(out, " {} ", op.name()).unwrap();
                    let next = self.write_infix(next, out);
                    out.push(')');
                    next
                }
                _ => {
                    write!(out, "{}(", op.name()).unwrap();
                    let mut next = i + 1;
                    for k in 0..op.arity() {
                        if k > 0 {
                            out.push_str(", ");
                        }
                        next = self.write_infix(next, out);
                    }
                    out.push(')');
                    next
                }
            },
        }
    }
}

impl fmt::Display for VariableTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_infix())
    }
}

/// Constraint every emitted tree must satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizeLimit {
    Height(usize),
    Nodes(usize),
}

impl SizeLimit {
    pub fn allows(&self, tree: &VariableTree) -> bool {
        match *self {
            SizeLimit::Height(h) => tree.height() <= h,
            SizeLimit::Nodes(n) => tree.len() <= n,
        }
    }
}

/// Which limit a configuration derives from the template height.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitKind {
    Height,
    Nodes,
}

fn grow_into<R: Rng + ?Sized>(
    rng: &mut R,
    sets: &SymbolSets,
    full: bool,
    depth: usize,
    max_depth: usize,
    spine: bool,
    out: &mut Vec<Symbol>,
) {
    let function = depth < max_depth && (full || spine || rng.random_bool(0.5));
    if !function {
        out.push(sets.sample_terminal(rng));
        return;
    }
    let symbol = sets.sample_function(rng);
    out.push(symbol);
    let arity = symbol.arity();
    let spine_child = if spine { rng.random_range(0..arity) } else { arity };
    for k in 0..arity {
        grow_into(rng, sets, full, depth + 1, max_depth, spine && k == spine_child, out);
    }
}

/// Ramped Half-and-Half: height drawn uniformly from `2..=h_max`, then
/// Full or Grow with equal probability.
///
/// Grow keeps one random root-to-leaf path of functions so the tree reaches
/// the drawn height.
pub fn init_ramped_half_and_half<R: Rng + ?Sized>(rng: &mut R, h_max: usize, sets: &SymbolSets) -> VariableTree {
    assert!(h_max >= 2, "ramp starts at height 2");
    let depth = rng.random_range(2..=h_max);
    let full = rng.random_bool(0.5);
    let mut nodes = Vec::new();
    grow_into(rng, sets, full, 0, depth, !full, &mut nodes);
    VariableTree { nodes }
}

/// Index of the tournament winner: `k` draws with replacement, lowest
/// fitness wins, ties to the earliest draw.
pub fn tournament_select<R: Rng + ?Sized>(fitness: &[f64], k: usize, rng: &mut R) -> usize {
    assert!(!fitness.is_empty() && k >= 1);
    let mut winner = rng.random_range(0..fitness.len());
    for _ in 1..k {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] < fitness[winner] {
            winner = c;
        }
    }
    winner
}

/// Replaces a uniformly random node of `a` with a uniformly random subtree
/// of `b`; falls back to a copy of `a` when the result breaks `limit`.
pub fn subtree_crossover<R: Rng + ?Sized>(
    a: &VariableTree,
    b: &VariableTree,
    rng: &mut R,
    limit: SizeLimit,
) -> VariableTree {
    let i = rng.random_range(0..a.len());
    let j = rng.random_range(0..b.len());
    let child = a.replace_subtree(i, b.subtree(j));
    if limit.allows(&child) {
        child
    } else {
        a.clone()
    }
}

/// Replaces a uniformly random node of `a` with a Grow subtree whose depth is
/// capped so `limit` holds; falls back to a copy of `a` otherwise.
pub fn subtree_mutation<R: Rng + ?Sized>(
    a: &VariableTree,
    rng: &mut R,
    limit: SizeLimit,
    sets: &SymbolSets,
) -> VariableTree {
    let i = rng.random_range(0..a.len());
    let cap = match limit {
        SizeLimit::Height(h) => h.saturating_sub(a.depths()[i]),
        SizeLimit::Nodes(n) => {
            let free = n.saturating_sub(a.len() - a.subtree(i).len());
            let mut d = 0;
            while template_size(d + 1, sets.arity()) <= free {
                d += 1;
            }
            d
        }
    };
    let mut subtree = Vec::new();
    grow_into(rng, sets, false, 0, cap, false, &mut subtree);
    let child = a.replace_subtree(i, &subtree);
    if limit.allows(&child) {
        child
    } else {
        a.clone()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TradConfig {
    pub population_size: usize,
    pub limit: SizeLimit,
    /// Upper end of the initialization ramp.
    pub init_height: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub sets: SymbolSets,
    pub budget: Budget,
    pub seed: u64,
}

impl TradConfig {
    /// Crossover 0.9, mutation 0.1, tournaments of 7. The node limit is the
    /// size of a full tree of height `h`.
    pub fn new(sets: SymbolSets, kind: LimitKind, h: usize, population_size: usize) -> Self {
        let limit = match kind {
            LimitKind::Height => SizeLimit::Height(h),
            LimitKind::Nodes => SizeLimit::Nodes(template_size(h, sets.arity())),
        };
        TradConfig {
            population_size,
            limit,
            init_height: h,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            tournament_size: 7,
            sets,
            budget: Budget::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population_size < 2 {
            return Err(ConfigError::new("population", "must be at least 2"));
        }
        let rates_ok = (0.0..=1.0).contains(&self.crossover_rate)
            && (0.0..=1.0).contains(&self.mutation_rate)
            && (self.crossover_rate + self.mutation_rate - 1.0).abs() <= 1e-12;
        if !rates_ok {
            return Err(ConfigError::new(
                "crossover_rate",
                "rates must lie in [0, 1] and sum to 1",
            ));
        }
        if self.tournament_size == 0 {
            return Err(ConfigError::new("tournament_size", "must be at least 1"));
        }
        if self.init_height < 2 {
            return Err(ConfigError::new("height", "must be at least 2"));
        }
        let fits = match self.limit {
            SizeLimit::Height(h) => self.init_height <= h,
            SizeLimit::Nodes(n) => template_size(self.init_height, self.sets.arity()) <= n,
        };
        if !fits {
            return Err(ConfigError::new("height", "initial trees would exceed the size limit"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TradIndividual {
    pub tree: VariableTree,
    pub fitness: f64,
    pub scale: Scale,
}

impl TradIndividual {
    pub fn to_elite(&self) -> Elite {
        Elite {
            model: Model::Variable(self.tree.clone()),
            fitness: self.fitness,
            scale: self.scale,
        }
    }
}

#[derive(Debug)]
pub struct TradRun {
    config: TradConfig,
    population: Vec<TradIndividual>,
    objective: TrainingObjective,
    rng: ChaCha8Rng,
    generations: usize,
    best: TradIndividual,
    trace: Vec<f64>,
}

impl TradRun {
    pub fn new(config: &TradConfig, train: Arc<Sample>) -> Result<Self, ConfigError> {
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
        let mut objective = TrainingObjective::new(train);
        let population: Vec<_> = (0..config.population_size)
            .map(|_| {
                let tree = init_ramped_half_and_half(&mut rng, config.init_height, &config.sets);
                evaluate(&mut objective, tree)
            })
            .collect();
        let best = best_of(&population).clone();
        Ok(TradRun {
            config: config.clone(),
            population,
            objective,
            rng,
            generations: 0,
            best,
            trace: Vec::new(),
        })
    }

    pub fn population(&self) -> &[TradIndividual] {
        &self.population
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }
}

fn evaluate(objective: &mut TrainingObjective, tree: VariableTree) -> TradIndividual {
    let p = tree.evaluate(&objective.sample().features);
    let f = objective.score(&p);
    TradIndividual {
        tree,
        fitness: if f.mse.is_nan() { f64::INFINITY } else { f.mse },
        scale: f.scale,
    }
}

fn best_of(population: &[TradIndividual]) -> &TradIndividual {
    population
        .iter()
        .reduce(|best, s| if s.fitness < best.fitness { s } else { best })
        .expect("population is not empty")
}

impl EvolutionaryRun for TradRun {
    fn step(&mut self) {
        let c = &self.config;
        let fitness: Vec<f64> = self.population.iter().map(|s| s.fitness).collect();
        let mut next = Vec::with_capacity(c.population_size);
        // the elite is carried over without re-evaluation
        next.push(best_of(&self.population).clone());
        while next.len() < c.population_size {
            let a = &self.population[tournament_select(&fitness, c.tournament_size, &mut self.rng)].tree;
            let child = if self.rng.random_bool(c.crossover_rate) {
                let b = &self.population[tournament_select(&fitness, c.tournament_size, &mut self.rng)].tree;
                subtree_crossover(a, b, &mut self.rng, c.limit)
            } else {
                subtree_mutation(a, &mut self.rng, c.limit, &c.sets)
            };
            debug_assert!(c.limit.allows(&child));
            next.push(evaluate(&mut self.objective, child));
        }
        self.population = next;
        self.generations += 1;
        let candidate = best_of(&self.population);
        if candidate.fitness < self.best.fitness {
            self.best = candidate.clone();
        }
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
        let first = &self.population[0].tree;
        self.population.iter().all(|s| &s.tree == first)
    }
}

/// Runs the baseline on `train` until the budget is spent.
pub fn run_gptrad(config: &TradConfig, train: Arc<Sample>) -> Result<RunResult, ConfigError> {
    if config.budget.is_empty() {
        return Err(ConfigError::new("budget", "set generations or seconds"));
    }
    let start = Instant::now();
    let mut run = TradRun::new(config, train)?;
    while !config.budget.exhausted(run.generations, start.elapsed()) {
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
