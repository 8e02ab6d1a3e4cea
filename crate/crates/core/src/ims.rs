//! Interleaved multistart: runs with doubling population sizes advanced at
//! a fixed cadence, with cross-run termination and validation-based final
//! selection.

use std::time::Instant;

use thiserror::Error;

use crate::data::{scaled_mse, Sample};
use crate::model::{derive_seed, Budget, ConfigError, Elite, EvolutionaryRun};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImsError {
    #[error("archive is empty: no generation was executed")]
    EmptyArchive,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImsConfig {
    /// Generations a run performs for every generation of its successor.
    pub cadence: usize,
    pub base_population: usize,
    /// Global budget; generations count across all runs.
    pub budget: Budget,
    pub seed: u64,
}

impl ImsConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cadence == 0 {
            return Err(ConfigError::new("ims_cadence", "must be at least 1"));
        }
        if self.base_population < 2 {
            return Err(ConfigError::new("ims_base_population", "must be at least 2"));
        }
        if self.budget.is_empty() {
            return Err(ConfigError::new("budget", "set generations or seconds"));
        }
        Ok(())
    }
}

/// What a factory needs to create run `index` (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSpec {
    pub index: usize,
    /// `2^index · base_population`.
    pub population_size: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Active,
    Terminated,
}

pub struct RunSlot {
    pub spec: RunSpec,
    pub status: RunStatus,
    run: Box<dyn EvolutionaryRun>,
}

impl RunSlot {
    pub fn run(&self) -> &dyn EvolutionaryRun {
        self.run.as_ref()
    }

    pub fn generations(&self) -> usize {
        self.run.generations()
    }

    pub fn is_active(&self) -> bool {
        self.status == RunStatus::Active
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveEntry {
    pub elite: Elite,
    /// Index of the run that produced the entry.
    pub run: usize,
}

/// Append-only store of run bests.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EliteArchive {
    entries: Vec<ArchiveEntry>,
}

impl EliteArchive {
    pub fn push(&mut self, entry: ArchiveEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry with the lowest scaled MSE on `validation`; ties to the earliest.
    pub fn select(&self, validation: &Sample) -> Result<(usize, f64), ImsError> {
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in self.entries.iter().enumerate() {
            let p = e.elite.model.evaluate(&validation.features);
            let f = scaled_mse(&validation.target, &p);
            let f = if f.is_nan() { f64::INFINITY } else { f };
            if best.is_none_or(|(_, b)| f < b) {
                best = Some((i, f));
            }
        }
        best.ok_or(ImsError::EmptyArchive)
    }
}

/// Single-threaded state machine driving the interleaved runs.
pub struct ImsScheduler<F> {
    config: ImsConfig,
    factory: F,
    slots: Vec<RunSlot>,
    archive: EliteArchive,
    total_generations: usize,
    started: Instant,
    closed: bool,
}

impl<F> ImsScheduler<F>
where
    F: FnMut(RunSpec) -> Box<dyn EvolutionaryRun>,
{
    pub fn new(config: ImsConfig, factory: F) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(ImsScheduler {
            config,
            factory,
            slots: Vec::new(),
            archive: EliteArchive::default(),
            total_generations: 0,
            started: Instant::now(),
            closed: false,
        })
    }

    pub fn slots(&self) -> &[RunSlot] {
        &self.slots
    }

    pub fn archive(&self) -> &EliteArchive {
        &self.archive
    }

    pub fn total_generations(&self) -> usize {
        self.total_generations
    }

    pub fn evaluations(&self) -> u64 {
        self.slots.iter().map(|s| s.run.evaluations()).sum()
    }

    pub fn budget_exhausted(&self) -> bool {
        self.config
            .budget
            .exhausted(self.total_generations, self.started.elapsed())
    }

    /// `None` once the doubled population size no longer fits a `usize`.
    fn spec(&self, index: usize) -> Option<RunSpec> {
        let factor = 1usize.checked_shl(u32::try_from(index).ok()?)?;
        Some(RunSpec {
            index,
            population_size: self.config.base_population.checked_mul(factor)?,
            seed: derive_seed(self.config.seed, index as u64, 0),
        })
    }

    /// Run that should execute next.
    ///
    /// The earliest active run is always eligible. Any later run, including
    /// the not-yet-created next one, is eligible once its nearest active
    /// predecessor has executed `g` generations per generation it is about
    /// to execute. The highest-index eligible run goes first.
    pub fn next_run(&self) -> usize {
        let mut leader: Option<usize> = None;
        let mut chosen = None;
        for (i, slot) in self.slots.iter().enumerate().filter(|(_, s)| s.is_active()) {
            let eligible = match leader {
                None => true,
                Some(p) => self.slots[p].generations() >= self.config.cadence * (slot.generations() + 1),
            };
            if eligible {
                chosen = Some(i);
            }
            leader = Some(i);
        }
        let next_eligible = match leader {
            None => true,
            Some(p) => self.slots[p].generations() >= self.config.cadence && self.spec(self.slots.len()).is_some(),
        };
        match chosen {
            Some(i) if !next_eligible => i,
            _ => self.slots.len(),
        }
    }

    /// Executes one generation of one run and applies the termination
    /// rules. Returns `(run index, generations that run has now executed)`,
    /// or `None` once the budget is spent.
    pub fn schedule_step(&mut self) -> Option<(usize, usize)> {
        if self.closed || self.budget_exhausted() {
            return None;
        }
        let index = self.next_run();
        if index == self.slots.len() {
            let spec = self.spec(index)?;
            let run = (self.factory)(spec);
            self.slots.push(RunSlot {
                spec,
                status: RunStatus::Active,
                run,
            });
        }
        let slot = &mut self.slots[index];
        slot.run.step();
        let done = slot.run.generations();
        self.total_generations += 1;
        self.check_termination(index);
        Some((index, done))
    }

    /// Terminates every active run that is beaten by a later active run or
    /// whose population has converged. The rules are evaluated on the state
    /// before any of this call's terminations. Returns the terminated indices.
    pub fn check_termination(&mut self, just_finished: usize) -> Vec<usize> {
        debug_assert!(just_finished < self.slots.len());
        let active: Vec<usize> = (0..self.slots.len()).filter(|&i| self.slots[i].is_active()).collect();
        let doomed: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&i| {
                let mine = self.slots[i].run.best_fitness();
                let beaten = active.iter().any(|&j| j > i && self.slots[j].run.best_fitness() < mine);
                beaten || self.slots[i].run.has_converged()
            })
            .collect();
        for &i in &doomed {
            self.terminate(i);
        }
        doomed
    }

    fn terminate(&mut self, i: usize) {
        let slot = &mut self.slots[i];
        slot.status = RunStatus::Terminated;
        self.archive.push(ArchiveEntry {
            elite: slot.run.best(),
            run: i,
        });
    }

    /// Steps until the budget is spent.
    pub fn run(&mut self) {
        while self.schedule_step().is_some() {}
    }

    /// Archives the bests of the runs still active and stops the scheme.
    pub fn shutdown(&mut self) {
        if self.closed {
            return;
        }
        self.closed = true;
        for i in 0..self.slots.len() {
            if self.slots[i].is_active() {
                self.terminate(i);
            }
        }
    }

    /// Shuts down and returns the archive entry that is best on `validation`.
    pub fn finalize(&mut self, validation: &Sample) -> Result<ArchiveEntry, ImsError> {
        self.shutdown();
        let (i, _) = self.archive.select(validation)?;
        Ok(self.archive.entries[i].clone())
    }
}
