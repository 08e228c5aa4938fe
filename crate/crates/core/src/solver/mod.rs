//! Dispatch solvers behind a common [`Solver`] trait, looked up by name in a
//! [`SolverRegistry`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DispatchError, Result};
use crate::model::{DispatchProblem, DispatchSolution};
use crate::penalty::PenaltyFactors;

pub mod ga;
pub mod pso;

pub use ga::{GaConfig, GeneticAlgorithm};
pub use pso::{ParticleSwarm, PsoConfig};

/// Best objective value ($/h) after each iteration or generation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConvergenceTrace(Vec<f64>);

impl ConvergenceTrace {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn with_capacity(n: usize) -> Self {
        Self(Vec::with_capacity(n))
    }

    pub(crate) fn push(&mut self, value: f64) {
        self.0.push(value);
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.0.last().copied()
    }

    pub fn is_non_increasing(&self) -> bool {
        self.0.windows(2).all(|w| w[1] <= w[0])
    }
}

#[derive(Clone, Debug)]
pub struct SolverRun {
    pub solution: DispatchSolution,
    pub trace: ConvergenceTrace,
}

pub trait Solver: Send + Sync {
    fn name(&self) -> &str;

    /// One independent run. Identical inputs and seed give identical output.
    fn solve(&self, problem: &DispatchProblem, h: &PenaltyFactors, seed: u64) -> Result<SolverRun>;
}

/// Overrides handed to a solver factory. `iterations` and `population` are
/// common to every solver; `extra` carries algorithm-specific knobs by name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverParams {
    pub iterations: Option<usize>,
    pub population: Option<usize>,
    pub extra: BTreeMap<String, f64>,
}

impl SolverParams {
    pub fn with_extra(mut self, key: impl Into<String>, value: f64) -> Self {
        self.extra.insert(key.into(), value);
        self
    }

    /// Parses `key=value`.
    pub fn parse_extra(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| DispatchError::invalid("param", format!("expected key=value, got `{spec}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| DispatchError::invalid(format!("param {key}"), format!("`{value}` is not a number")))?;
        self.extra.insert(key.trim().to_string(), value);
        Ok(())
    }
}

pub(crate) fn param_count(key: &str, value: f64) -> Result<usize> {
    if value < 0.0 || value.fract() != 0.0 || !value.is_finite() {
        return Err(DispatchError::invalid(
            key,
            format!("expected a non-negative integer, got {value}"),
        ));
    }
    Ok(value as usize)
}

type Factory = Box<dyn Fn(&SolverParams) -> Result<Box<dyn Solver>> + Send + Sync>;

struct Entry {
    description: String,
    factory: Factory,
}

/// Name → solver factory.
#[derive(Default)]
pub struct SolverRegistry {
    entries: BTreeMap<String, Entry>,
}

impl SolverRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding `pso` and `ga`.
    pub fn with_builtins() -> Self {
        let mut registry = Self::new();
        registry.register(
            pso::NAME,
            "constriction-factor particle swarm",
            |params: &SolverParams| {
                let mut config = PsoConfig::default();
                config.apply(params)?;
                config.validate()?;
                Ok(Box::new(ParticleSwarm::new(config)) as Box<dyn Solver>)
            },
        );
        registry.register(
            ga::NAME,
            "binary-coded genetic algorithm, roulette-wheel selection",
            |params: &SolverParams| {
                let mut config = GaConfig::default();
                config.apply(params)?;
                config.validate()?;
                Ok(Box::new(GeneticAlgorithm::new(config)) as Box<dyn Solver>)
            },
        );
        registry
    }

    /// Adds or replaces a solver under `name`.
    pub fn register<F>(&mut self, name: &str, description: &str, factory: F)
    where
        F: Fn(&SolverParams) -> Result<Box<dyn Solver>> + Send + Sync + 'static,
    {
        self.entries.insert(
            name.to_string(),
            Entry {
                description: description.to_string(),
                factory: Box::new(factory),
            },
        );
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn describe(&self, name: &str) -> Option<&str> {
        self.entries.get(name).map(|e| e.description.as_str())
    }

    pub fn create(&self, name: &str, params: &SolverParams) -> Result<Box<dyn Solver>> {
        let entry = self
            .entries
            .get(name)
            .ok_or_else(|| DispatchError::UnknownSolver(name.to_string()))?;
        (entry.factory)(params)
    }
}

impl fmt::Debug for SolverRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}
