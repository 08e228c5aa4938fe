//! Constriction-factor particle swarm.
//!
//! Velocity update, per particle and dimension:
//!
//! ```text
//! v ← χ · (w(t)·v + c1·r1·(pbest − x) + c2·r2·(gbest − x))
//! w(t) = w_max − (w_max − w_min)·t/T
//! ```
//!
//! followed by a velocity clamp of `±v_max_fraction·(p_max − p_min)`, the
//! position move, a clamp to unit limits and balance repair. Every position
//! the swarm holds is therefore feasible and the objective needs no penalty
//! term for the balance constraint.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{param_count, ConvergenceTrace, Solver, SolverParams, SolverRun};
use crate::error::{DispatchError, Result};
use crate::model::{DispatchProblem, ScalarizedObjective};
use crate::penalty::PenaltyFactors;
use crate::repair::repair_balance;

pub const NAME: &str = "pso";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub particles: usize,
    pub iterations: usize,
    pub w_max: f64,
    pub w_min: f64,
    pub c1: f64,
    pub c2: f64,
    pub phi: f64,
    /// Constriction factor χ.
    pub constriction: f64,
    /// Velocity limit as a fraction of each unit's operating range.
    pub v_max_fraction: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            particles: 10,
            iterations: 500,
            w_max: 0.9,
            w_min: 0.4,
            c1: 2.05,
            c2: 2.05,
            phi: 4.1,
            constriction: 0.7298,
            v_max_fraction: 0.5,
            seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(DispatchError::invalid("particles", "must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(DispatchError::invalid("iterations", "must be at least 1"));
        }
        if (self.phi - (self.c1 + self.c2)).abs() > 1e-9 {
            return Err(DispatchError::invalid(
                "phi",
                format!("phi {} must equal c1 + c2 = {}", self.phi, self.c1 + self.c2),
            ));
        }
        if self.phi <= 4.0 {
            return Err(DispatchError::invalid(
                "phi",
                format!("must exceed 4, got {}", self.phi),
            ));
        }
        if !(self.constriction > 0.0 && self.constriction < 1.0) {
            return Err(DispatchError::invalid(
                "constriction",
                format!("must lie in (0, 1), got {}", self.constriction),
            ));
        }
        if !(self.v_max_fraction > 0.0 && self.v_max_fraction <= 1.0) {
            return Err(DispatchError::invalid(
                "v_max_fraction",
                format!("must lie in (0, 1], got {}", self.v_max_fraction),
            ));
        }
        if !(self.w_max.is_finite() && self.w_min.is_finite()) {
            return Err(DispatchError::invalid("w_max/w_min", "must be finite"));
        }
        Ok(())
    }

    /// Applies overrides. Setting `c1` or `c2` without `phi` re-derives `phi`.
    pub fn apply(&mut self, params: &SolverParams) -> Result<()> {
        if let Some(n) = params.iterations {
            self.iterations = n;
        }
        if let Some(n) = params.population {
            self.particles = n;
        }
        let mut phi_given = false;
        for (key, &value) in &params.extra {
            match key.as_str() {
                "particles" => self.particles = param_count(key, value)?,
                "w_max" => self.w_max = value,
                "w_min" => self.w_min = value,
                "c1" => self.c1 = value,
                "c2" => self.c2 = value,
                "phi" => {
                    self.phi = value;
                    phi_given = true;
                }
                "constriction" => self.constriction = value,
                "v_max_fraction" => self.v_max_fraction = value,
                other => return Err(DispatchError::invalid(format!("param {other}"), "not a pso parameter")),
            }
        }
        if !phi_given {
            self.phi = self.c1 + self.c2;
        }
        Ok(())
    }

    /// Linearly decreasing inertia weight at iteration `t`.
    pub fn inertia(&self, t: usize) -> f64 {
        self.w_max - (self.w_max - self.w_min) * t as f64 / self.iterations as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_value: f64,
}

/// State of one swarm run: particles, global best and the run's RNG stream.
#[derive(Clone, Debug)]
pub struct Swarm {
    particles: Vec<Particle>,
    best_position: Vec<f64>,
    best_value: f64,
    objective: ScalarizedObjective,
    rng: ChaCha8Rng,
}

impl Swarm {
    /// Uniform random positions within limits, repaired to balance; zero velocities.
    pub fn init(problem: &DispatchProblem, config: &PsoConfig, h: &PenaltyFactors) -> Result<Self> {
        let objective = problem.scalarize(h)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let particles = (0..config.particles)
            .map(|_| {
                let mut position: Vec<f64> = problem
                    .units()
                    .iter()
                    .map(|u| rng.gen_range(u.p_min..=u.p_max))
                    .collect();
                repair_balance(problem, &mut position);
                let value = objective.value(&position);
                Particle {
                    velocity: vec![0.0; position.len()],
                    best_position: position.clone(),
                    best_value: value,
                    position,
                }
            })
            .collect();
        Ok(Self::assemble(particles, objective, rng))
    }

    /// Swarm from explicit particles; personal bests are taken as given.
    pub fn from_particles(
        problem: &DispatchProblem,
        h: &PenaltyFactors,
        particles: Vec<Particle>,
        seed: u64,
    ) -> Result<Self> {
        if particles.is_empty() {
            return Err(DispatchError::invalid("particles", "must be at least 1"));
        }
        for p in &particles {
            for v in [&p.position, &p.velocity, &p.best_position] {
                if v.len() != problem.len() {
                    return Err(DispatchError::DimensionMismatch {
                        expected: problem.len(),
                        got: v.len(),
                    });
                }
            }
        }
        let objective = problem.scalarize(h)?;
        Ok(Self::assemble(particles, objective, ChaCha8Rng::seed_from_u64(seed)))
    }

    fn assemble(particles: Vec<Particle>, objective: ScalarizedObjective, rng: ChaCha8Rng) -> Self {
        let leader = particles
            .iter()
            .min_by(|a, b| a.best_value.total_cmp(&b.best_value))
            .expect("non-empty swarm");
        Self {
            best_position: leader.best_position.clone(),
            best_value: leader.best_value,
            particles,
            objective,
            rng,
        }
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn best_position(&self) -> &[f64] {
        &self.best_position
    }

    pub fn best_value(&self) -> f64 {
        self.best_value
    }

    /// Moves every particle once, then refreshes personal and global bests.
    pub fn step(&mut self, problem: &DispatchProblem, config: &PsoConfig, iteration: usize) -> Result<()> {
        if iteration >= config.iterations {
            return Err(DispatchError::invalid(
                "iteration",
                format!("{iteration} is past the configured {} iterations", config.iterations),
            ));
        }
        let w = config.inertia(iteration);
        let chi = config.constriction;
        let units = problem.units();
        for particle in &mut self.particles {
            for (d, unit) in units.iter().enumerate() {
                let r1: f64 = self.rng.gen();
                let r2: f64 = self.rng.gen();
                let x = particle.position[d];
                let v_max = config.v_max_fraction * unit.range();
                let v = chi
                    * (w * particle.velocity[d]
                        + config.c1 * r1 * (particle.best_position[d] - x)
                        + config.c2 * r2 * (self.best_position[d] - x));
                let v = v.clamp(-v_max, v_max);
                particle.velocity[d] = v;
                particle.position[d] = unit.clamp(x + v);
            }
            repair_balance(problem, &mut particle.position);
            let value = self.objective.value(&particle.position);
            if value < particle.best_value {
                particle.best_value = value;
                particle.best_position.clone_from(&particle.position);
            }
        }
        for particle in &self.particles {
            if particle.best_value < self.best_value {
                self.best_value = particle.best_value;
                self.best_position.clone_from(&particle.best_position);
            }
        }
        Ok(())
    }
}

/// Full run: initialization plus `config.iterations` steps.
pub fn run(problem: &DispatchProblem, config: &PsoConfig, h: &PenaltyFactors) -> Result<SolverRun> {
    config.validate()?;
    let mut swarm = Swarm::init(problem, config, h)?;
    let mut trace = ConvergenceTrace::with_capacity(config.iterations);
    for t in 0..config.iterations {
        swarm.step(problem, config, t)?;
        trace.push(swarm.best_value());
    }
    let solution = problem.evaluate(swarm.best_position(), h)?;
    Ok(SolverRun { solution, trace })
}

#[derive(Clone, Debug, Default)]
pub struct ParticleSwarm {
    config: PsoConfig,
}

impl ParticleSwarm {
    pub fn new(config: PsoConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> &PsoConfig {
        &self.config
    }
}

impl Solver for ParticleSwarm {
    fn name(&self) -> &str {
        NAME
    }

    fn solve(&self, problem: &DispatchProblem, h: &PenaltyFactors, seed: u64) -> Result<SolverRun> {
        let config = PsoConfig {
            seed,
            ..self.config.clone()
        };
        run(problem, &config, h)
    }
}
