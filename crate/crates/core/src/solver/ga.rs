//! Binary-coded genetic algorithm.
//!
//! Each unit's output is a `bits_per_gene` unsigned gene mapped linearly onto
//! `[p_min, p_max]`, so decoded dispatches always respect unit limits. Decoded
//! vectors go through the same balance repair as the swarm before they are
//! scored. A generation keeps the `elitism` best chromosomes, fills the rest
//! from a roulette-wheel mating pool with single-point crossover and bit-flip
//! mutation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{param_count, ConvergenceTrace, Solver, SolverParams, SolverRun};
use crate::error::{DispatchError, Result};
use crate::model::{DispatchProblem, ScalarizedObjective};
use crate::penalty::PenaltyFactors;
use crate::repair::repair_balance;

pub const NAME: &str = "ga";

const MAX_BITS_PER_GENE: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub individuals: usize,
    pub generations: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub bits_per_gene: usize,
    pub elitism: usize,
    /// Flip at most one randomly chosen bit per child (with probability
    /// `p_mutation`) instead of testing every bit independently.
    pub single_site_mutation: bool,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            individuals: 10,
            generations: 500,
            p_crossover: 0.96,
            p_mutation: 0.033,
            bits_per_gene: 16,
            elitism: 1,
            single_site_mutation: false,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_crossover", self.p_crossover), ("p_mutation", self.p_mutation)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(DispatchError::invalid(name, format!("must lie in [0, 1], got {p}")));
            }
        }
        if !(4..=MAX_BITS_PER_GENE).contains(&self.bits_per_gene) {
            return Err(DispatchError::invalid(
                "bits_per_gene",
                format!("must lie in [4, {MAX_BITS_PER_GENE}], got {}", self.bits_per_gene),
            ));
        }
        if self.individuals == 0 {
            return Err(DispatchError::invalid("individuals", "must be at least 1"));
        }
        if self.elitism >= self.individuals {
            return Err(DispatchError::invalid(
                "elitism",
                format!(
                    "{} must be below the population size {}",
                    self.elitism, self.individuals
                ),
            ));
        }
        if self.generations == 0 {
            return Err(DispatchError::invalid("generations", "must be at least 1"));
        }
        Ok(())
    }

    pub fn apply(&mut self, params: &SolverParams) -> Result<()> {
        if let Some(n) = params.iterations {
            self.generations = n;
        }
        if let Some(n) = params.population {
            self.individuals = n;
        }
        for (key, &value) in &params.extra {
            match key.as_str() {
                "individuals" => self.individuals = param_count(key, value)?,
                "p_crossover" => self.p_crossover = value,
                "p_mutation" => self.p_mutation = value,
                "bits_per_gene" => self.bits_per_gene = param_count(key, value)?,
                "elitism" => self.elitism = param_count(key, value)?,
                "single_site_mutation" => self.single_site_mutation = value != 0.0,
                other => return Err(DispatchError::invalid(format!("param {other}"), "not a ga parameter")),
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chromosome {
    pub bits: Vec<bool>,
    /// Relative standing in its generation, in `[0, 1]`.
    pub fitness: f64,
    pub objective: f64,
}

/// Maps each gene onto its unit's limits: all zeros → `p_min`, all ones → `p_max`.
pub fn decode_genes(bits: &[bool], problem: &DispatchProblem, bits_per_gene: usize) -> Result<Vec<f64>> {
    let expected = problem.len() * bits_per_gene;
    if bits.len() != expected {
        return Err(DispatchError::DimensionMismatch {
            expected,
            got: bits.len(),
        });
    }
    let full_scale = ((1u64 << bits_per_gene) - 1) as f64;
    Ok(bits
        .chunks(bits_per_gene)
        .zip(problem.units())
        .map(|(gene, unit)| {
            let u = gene.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b));
            unit.p_min + u as f64 * unit.range() / full_scale
        })
        .collect())
}

/// Gene mapping followed by balance repair; this is the dispatch a chromosome is scored on.
pub fn decode(bits: &[bool], problem: &DispatchProblem, config: &GaConfig) -> Result<Vec<f64>> {
    let mut powers = decode_genes(bits, problem, config.bits_per_gene)?;
    repair_balance(problem, &mut powers);
    Ok(powers)
}

/// Fitness-proportionate pick. A wheel with no positive slice degenerates to a uniform draw.
pub fn roulette_select<R: Rng + ?Sized>(fitness: &[f64], rng: &mut R) -> usize {
    assert!(!fitness.is_empty(), "roulette wheel needs at least one slot");
    let total: f64 = fitness.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return rng.gen_range(0..fitness.len());
    }
    let spin = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &f) in fitness.iter().enumerate() {
        if f > 0.0 {
            acc += f;
            last_positive = i;
            if spin < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Exchanges the suffixes of `a` and `b` starting at `site`.
pub fn crossover_at(a: &[bool], b: &[bool], site: usize) -> (Vec<bool>, Vec<bool>) {
    debug_assert_eq!(a.len(), b.len());
    let mut child_a = a[..site].to_vec();
    child_a.extend_from_slice(&b[site..]);
    let mut child_b = b[..site].to_vec();
    child_b.extend_from_slice(&a[site..]);
    (child_a, child_b)
}

/// Single-point crossover with probability `p_crossover`; copies otherwise.
pub fn crossover<R: Rng + ?Sized>(a: &[bool], b: &[bool], rng: &mut R, config: &GaConfig) -> (Vec<bool>, Vec<bool>) {
    let len = a.len();
    if len >= 2 && rng.gen::<f64>() < config.p_crossover {
        let site = rng.gen_range(1..len);
        crossover_at(a, b, site)
    } else {
        (a.to_vec(), b.to_vec())
    }
}

pub fn mutate<R: Rng + ?Sized>(bits: &mut [bool], rng: &mut R, config: &GaConfig) {
    if bits.is_empty() {
        return;
    }
    if config.single_site_mutation {
        if rng.gen::<f64>() < config.p_mutation {
            let site = rng.gen_range(0..bits.len());
            bits[site] = !bits[site];
        }
    } else {
        for bit in bits.iter_mut() {
            if rng.gen::<f64>() < config.p_mutation {
                *bit = !*bit;
            }
        }
    }
}

/// `(worst − objective) / (worst − best)` within the population; 1 for everyone
/// when all objectives are equal.
pub fn assign_fitness(population: &mut [Chromosome]) {
    let (best, worst) = population.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(b, w), c| {
        (b.min(c.objective), w.max(c.objective))
    });
    let spread = worst - best;
    for c in population.iter_mut() {
        c.fitness = if spread > 0.0 {
            ((worst - c.objective) / spread).clamp(0.0, 1.0)
        } else {
            1.0
        };
    }
}

struct Scorer<'a> {
    problem: &'a DispatchProblem,
    config: &'a GaConfig,
    objective: ScalarizedObjective,
}

impl Scorer<'_> {
    fn score(&self, bits: &[bool]) -> Result<(f64, Vec<f64>)> {
        let powers = decode(bits, self.problem, self.config)?;
        Ok((self.objective.value(&powers), powers))
    }
}

struct Incumbent {
    value: f64,
    powers: Vec<f64>,
}

impl Default for Incumbent {
    fn default() -> Self {
        Self {
            value: f64::INFINITY,
            powers: Vec::new(),
        }
    }
}

impl Incumbent {
    fn offer(&mut self, value: f64, powers: Vec<f64>) {
        if value < self.value {
            self.value = value;
            self.powers = powers;
        }
    }
}

pub fn run(problem: &DispatchProblem, config: &GaConfig, h: &PenaltyFactors) -> Result<SolverRun> {
    config.validate()?;
    let scorer = Scorer {
        problem,
        config,
        objective: problem.scalarize(h)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let len = problem.len() * config.bits_per_gene;

    let mut best = Incumbent::default();

    let mut population = Vec::with_capacity(config.individuals);
    for _ in 0..config.individuals {
        let bits: Vec<bool> = (0..len).map(|_| rng.gen()).collect();
        let (objective, powers) = scorer.score(&bits)?;
        best.offer(objective, powers);
        population.push(Chromosome {
            bits,
            fitness: 0.0,
            objective,
        });
    }
    assign_fitness(&mut population);

    let offspring_needed = config.individuals - config.elitism;
    let pool_size = offspring_needed + offspring_needed % 2;
    let mut trace = ConvergenceTrace::with_capacity(config.generations);
    for _ in 0..config.generations {
        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by(|&a, &b| {
            population[a]
                .objective
                .total_cmp(&population[b].objective)
                .then(a.cmp(&b))
        });
        let mut next: Vec<Chromosome> = ranked[..config.elitism]
            .iter()
            .map(|&i| population[i].clone())
            .collect();

        let fitness: Vec<f64> = population.iter().map(|c| c.fitness).collect();
        let mut pool: Vec<usize> = (0..pool_size).map(|_| roulette_select(&fitness, &mut rng)).collect();
        pool.shuffle(&mut rng);
        for pair in pool.chunks(2) {
            let (mut a, mut b) = crossover(&population[pair[0]].bits, &population[pair[1]].bits, &mut rng, config);
            mutate(&mut a, &mut rng, config);
            mutate(&mut b, &mut rng, config);
            for bits in [a, b] {
                if next.len() == config.individuals {
                    break;
                }
                let (objective, powers) = scorer.score(&bits)?;
                best.offer(objective, powers);
                next.push(Chromosome {
                    bits,
                    fitness: 0.0,
                    objective,
                });
            }
        }
        assign_fitness(&mut next);
        population = next;
        trace.push(best.value);
    }

    let solution = problem.evaluate(&best.powers, h)?;
    Ok(SolverRun { solution, trace })
}

#[derive(Clone, Debug, Default)]
pub struct GeneticAlgorithm {
    config: GaConfig,
}

impl GeneticAlgorithm {
    pub fn new(config: GaConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> &GaConfig {
        &self.config
    }
}

impl Solver for GeneticAlgorithm {
    fn name(&self) -> &str {
        NAME
    }

    fn solve(&self, problem: &DispatchProblem, h: &PenaltyFactors, seed: u64) -> Result<SolverRun> {
        let config = GaConfig {
            seed,
            ..self.config.clone()
        };
        run(problem, &config, h)
    }
}
