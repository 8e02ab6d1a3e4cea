//! Shared result types for every search algorithm.

use std::time::Duration;

use crate::data::{FeatureMatrix, Scale};
use crate::gptrad::VariableTree;
use crate::tree::GenotypeTree;

/// An evolved expression, independent of the representation that produced it.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Template(GenotypeTree),
    Variable(VariableTree),
}

impl Model {
    /// Unscaled output for every row of `x`.
    pub fn evaluate(&self, x: &FeatureMatrix) -> Vec<f64> {
        match self {
            Model::Template(t) => t.evaluate(x),
            Model::Variable(t) => t.evaluate(x),
        }
    }

    pub fn to_infix(&self) -> String {
        match self {
            Model::Template(t) => t.to_infix(),
            Model::Variable(t) => t.to_infix(),
        }
    }
}

/// Best solution found by a run, with its training fitness and scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct Elite {
    pub model: Model,
    pub fitness: f64,
    pub scale: Scale,
}

/// Outcome of one complete run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub best: Elite,
    /// Best training fitness after each generation; non-increasing.
    pub trace: Vec<f64>,
    pub evaluations: u64,
    pub generations: usize,
    pub elapsed: Duration,
}

/// Stopping rule; whichever limit is reached first ends the run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Budget {
    pub generations: Option<usize>,
    pub seconds: Option<f64>,
}

impl Budget {
    pub fn generations(n: usize) -> Self {
        Budget {
            generations: Some(n),
            seconds: None,
        }
    }

    pub fn seconds(s: f64) -> Self {
        Budget {
            generations: None,
            seconds: Some(s),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.generations.is_none() && self.seconds.is_none()
    }

    pub fn exhausted(&self, generations: usize, elapsed: Duration) -> bool {
        self.generations.is_some_and(|g| generations >= g) || self.seconds.is_some_and(|s| elapsed.as_secs_f64() >= s)
    }
}

/// A run that can be advanced one generation at a time.
pub trait EvolutionaryRun {
    /// Performs exactly one generation.
    fn step(&mut self);
    fn generations(&self) -> usize;
    fn population_size(&self) -> usize;
    fn evaluations(&self) -> u64;
    /// Best training fitness seen so far.
    fn best_fitness(&self) -> f64;
    fn best(&self) -> Elite;
    /// Whether every individual is syntactically identical.
    fn has_converged(&self) -> bool;
}

/// Error for an invalid algorithm configuration; names the offending field.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid `{field}`: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        ConfigError {
            field,
            message: message.into(),
        }
    }
}

/// Derives an independent 64-bit seed from a master seed and two stream
/// indices with the splitmix64 finalizer.
pub fn derive_seed(master: u64, stream: u64, role: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(mix(master) ^ stream) ^ role)
}
