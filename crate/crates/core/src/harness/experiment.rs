//! Multi-trial experiments: every (solver, demand) pair is run `trials` times
//! with seeds `base_seed + trial_index`, and the results are summarized.
//!
//! Everything in [`ExperimentReport`] that gets serialized is a function of the
//! spec alone. Wall-clock times live in [`Timing`] and are written to a separate
//! file so `report.json` is byte-identical between repeated runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem_file::{load_problem_data, ProblemData};
use super::trace::export_trace;
use crate::error::{DispatchError, Result};
use crate::model::{DispatchSolution, Gas, Weights};
use crate::penalty::{penalty_factors_all, PenaltyFactors};
use crate::solver::{ConvergenceTrace, SolverParams, SolverRegistry};

pub const DEFAULT_TRIALS: usize = 50;

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub problem: PathBuf,
    /// Demands to run, MW. Empty means the demand stored in the problem file.
    pub demands: Vec<f64>,
    pub solvers: Vec<String>,
    pub trials: usize,
    /// Shared overrides. An `extra` key of the form `ga.p_mutation` only
    /// reaches the solver named before the dot.
    pub params: SolverParams,
    pub base_seed: u64,
    pub weights: Weights,
    /// Concurrent trials; `None` uses every core.
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(problem: impl Into<PathBuf>) -> Self {
        Self {
            problem: problem.into(),
            demands: Vec::new(),
            solvers: vec!["pso".into(), "ga".into()],
            trials: DEFAULT_TRIALS,
            params: SolverParams::default(),
            base_seed: 0,
            weights: Weights::COMBINED,
            workers: None,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(DispatchError::invalid("trials", "must be at least 1"));
        }
        if self.solvers.is_empty() {
            return Err(DispatchError::invalid("solvers", "no solver selected"));
        }
        if self.workers == Some(0) {
            return Err(DispatchError::invalid("workers", "must be at least 1"));
        }
        Ok(())
    }

    fn params_for(&self, solver: &str) -> SolverParams {
        let mut params = SolverParams {
            iterations: self.params.iterations,
            population: self.params.population,
            extra: BTreeMap::new(),
        };
        for (key, &value) in &self.params.extra {
            match key.split_once('.') {
                Some((target, inner)) if target == solver => {
                    params.extra.insert(inner.to_string(), value);
                }
                Some(_) => {}
                None => {
                    params.extra.insert(key.clone(), value);
                }
            }
        }
        params
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    pub solution: DispatchSolution,
}

/// Aggregates over the trials' total cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub best: f64,
    pub median: f64,
    pub mean: f64,
    pub worst: f64,
    pub best_trial: usize,
    pub feasible_trials: usize,
}

impl Summary {
    fn of(trials: &[TrialRecord]) -> Self {
        let mut costs: Vec<f64> = trials.iter().map(|t| t.solution.total_cost).collect();
        let best_trial = trials
            .iter()
            .min_by(|a, b| a.solution.total_cost.total_cmp(&b.solution.total_cost))
            .map_or(0, |t| t.index);
        costs.sort_by(f64::total_cmp);
        let n = costs.len();
        let median = if n % 2 == 1 {
            costs[n / 2]
        } else {
            0.5 * (costs[n / 2 - 1] + costs[n / 2])
        };
        Self {
            best: costs[0],
            median,
            mean: costs.iter().sum::<f64>() / n as f64,
            worst: costs[n - 1],
            best_trial,
            feasible_trials: trials.iter().filter(|t| t.solution.is_feasible()).count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Wall-clock seconds per trial, by index.
    pub seconds: Vec<f64>,
    pub mean: f64,
    /// Trial whose time is nearest the mean.
    pub representative_trial: usize,
}

impl Timing {
    fn of(seconds: Vec<f64>) -> Self {
        let mean = seconds.iter().sum::<f64>() / seconds.len() as f64;
        let representative_trial = seconds
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - mean).abs().total_cmp(&(b.1 - mean).abs()))
            .map_or(0, |(i, _)| i);
        Self {
            seconds,
            mean,
            representative_trial,
        }
    }
}

/// Results for one solver at one demand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub solver: String,
    pub demand: f64,
    /// Penalty factors used, $/kg.
    pub h: BTreeMap<Gas, f64>,
    pub trials: Vec<TrialRecord>,
    pub summary: Summary,
    #[serde(skip)]
    pub timing: Option<Timing>,
    #[serde(skip)]
    pub traces: Vec<ConvergenceTrace>,
}

impl TrialReport {
    pub fn best(&self) -> &TrialRecord {
        &self.trials[self.summary.best_trial]
    }

    /// Trial nearest the mean run time, or the best one if no timing was kept.
    pub fn representative(&self) -> &TrialRecord {
        let i = self
            .timing
            .as_ref()
            .map_or(self.summary.best_trial, |t| t.representative_trial);
        &self.trials[i]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub problem: Option<String>,
    pub weights: Weights,
    pub base_seed: u64,
    pub results: Vec<TrialReport>,
}

#[derive(Serialize)]
struct TimingEntry<'a> {
    solver: &'a str,
    demand: f64,
    #[serde(flatten)]
    timing: &'a Timing,
}

impl ExperimentReport {
    /// The deterministic section as pretty JSON.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn timing_json(&self) -> Result<String> {
        let entries: Vec<TimingEntry> = self
            .results
            .iter()
            .filter_map(|r| {
                r.timing.as_ref().map(|timing| TimingEntry {
                    solver: &r.solver,
                    demand: r.demand,
                    timing,
                })
            })
            .collect();
        Ok(serde_json::to_string_pretty(&entries)? + "\n")
    }

    /// Writes `report.json`, `timing.json`, `table.txt` and one trace CSV per trial.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let traces = dir.join("traces");
        fs::create_dir_all(&traces)?;
        for r in &self.results {
            for (i, trace) in r.traces.iter().enumerate() {
                export_trace(trace, traces.join(trace_file_name(&r.solver, r.demand, i)))?;
            }
        }
        fs::write(dir.join("report.json"), self.to_json()?)?;
        fs::write(dir.join("timing.json"), self.timing_json()?)?;
        fs::write(dir.join("table.txt"), render_table(self))?;
        Ok(())
    }
}

pub fn trace_file_name(solver: &str, demand: f64, trial: usize) -> String {
    format!("{solver}_{demand}_trial{trial:03}.csv")
}

/// Loads the problem, runs every pair with the built-in solvers and writes
/// the outputs when `out_dir` is set.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let data = load_problem_data(&spec.problem)?;
    let report = run_on(&data, spec, &SolverRegistry::with_builtins())?;
    if let Some(dir) = &spec.out_dir {
        report.write_to(dir)?;
    }
    Ok(report)
}

pub fn run_on(data: &ProblemData, spec: &ExperimentSpec, registry: &SolverRegistry) -> Result<ExperimentReport> {
    spec.validate()?;
    let demands = if spec.demands.is_empty() {
        vec![data
            .demand
            .ok_or_else(|| DispatchError::invalid("demand", "none given and none in the problem file"))?]
    } else {
        spec.demands.clone()
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = spec.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| DispatchError::invalid("workers", e.to_string()))?;

    let mut results = Vec::new();
    for &demand in &demands {
        let problem = data.problem(demand, spec.weights)?;
        let h = penalty_factors_all(&problem)?;
        for name in &spec.solvers {
            let solver = registry.create(name, &spec.params_for(name))?;
            log::info!("{name} at {demand} MW: {} trials", spec.trials);
            let outcomes: Vec<Result<(TrialRecord, ConvergenceTrace, f64)>> = pool.install(|| {
                (0..spec.trials)
                    .into_par_iter()
                    .map(|index| {
                        let seed = spec.base_seed.wrapping_add(index as u64);
                        let start = Instant::now();
                        let run = solver.solve(&problem, &h, seed).map_err(|e| DispatchError::Trial {
                            trial: index,
                            source: Box::new(e),
                        })?;
                        let seconds = start.elapsed().as_secs_f64();
                        Ok((
                            TrialRecord {
                                index,
                                seed,
                                solution: run.solution,
                            },
                            run.trace,
                            seconds,
                        ))
                    })
                    .collect()
            });
            let mut trials = Vec::with_capacity(spec.trials);
            let mut traces = Vec::with_capacity(spec.trials);
            let mut seconds = Vec::with_capacity(spec.trials);
            for outcome in outcomes {
                let (record, trace, t) = outcome?;
                trials.push(record);
                traces.push(trace);
                seconds.push(t);
            }
            results.push(report_for(name, &h, trials, traces, seconds));
        }
    }
    Ok(ExperimentReport {
        problem: data.name.clone(),
        weights: spec.weights,
        base_seed: spec.base_seed,
        results,
    })
}

fn report_for(
    solver: &str,
    h: &PenaltyFactors,
    trials: Vec<TrialRecord>,
    traces: Vec<ConvergenceTrace>,
    seconds: Vec<f64>,
) -> TrialReport {
    TrialReport {
        solver: solver.to_string(),
        demand: h.demand(),
        h: h.iter().collect(),
        summary: Summary::of(&trials),
        trials,
        timing: Some(Timing::of(seconds)),
        traces,
    }
}

/// Plain-text table, one column per (solver, demand), showing the
/// representative trial followed by the aggregates.
pub fn render_table(report: &ExperimentReport) -> String {
    let cols = &report.results;
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    let header: Vec<String> = cols
        .iter()
        .map(|r| format!("{} {} MW", r.solver.to_uppercase(), r.demand))
        .collect();
    let n = cols
        .iter()
        .map(|r| r.trials[0].solution.powers.len())
        .max()
        .unwrap_or(0);
    for i in 0..n {
        rows.push((
            format!("P{}", i + 1),
            cols.iter()
                .map(|r| {
                    r.representative()
                        .solution
                        .powers
                        .get(i)
                        .map_or(String::new(), |p| format!("{p:.2}"))
                })
                .collect(),
        ));
    }
    let gases: Vec<Gas> = cols
        .iter()
        .flat_map(|r| r.h.keys().copied())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    for gas in &gases {
        rows.push((
            format!("E_{gas}"),
            cols.iter()
                .map(|r| {
                    r.representative()
                        .solution
                        .emissions
                        .get(gas)
                        .map_or(String::new(), |e| format!("{e:.2}"))
                })
                .collect(),
        ));
    }
    let field = |label: &str, f: &dyn Fn(&TrialReport) -> String| -> (String, Vec<String>) {
        (label.to_string(), cols.iter().map(f).collect())
    };
    rows.push(field("EC", &|r| {
        format!("{:.2}", r.representative().solution.emission_cost)
    }));
    rows.push(field("FC", &|r| {
        format!("{:.2}", r.representative().solution.fuel_cost)
    }));
    rows.push(field("TC", &|r| {
        format!("{:.2}", r.representative().solution.total_cost)
    }));
    rows.push(field("t", &|r| {
        r.timing
            .as_ref()
            .map_or(String::new(), |t| format!("{:.4}", t.seconds[t.representative_trial]))
    }));
    rows.push(field("trial", &|r| r.representative().index.to_string()));
    rows.push((String::new(), vec![String::new(); cols.len()]));
    for gas in &gases {
        rows.push(field(&format!("h_{gas}"), &|r| {
            r.h.get(gas).map_or(String::new(), |h| format!("{h:.4}"))
        }));
    }
    rows.push(field("best TC", &|r| format!("{:.2}", r.summary.best)));
    rows.push(field("best trial", &|r| r.summary.best_trial.to_string()));
    rows.push(field("median TC", &|r| format!("{:.2}", r.summary.median)));
    rows.push(field("mean TC", &|r| format!("{:.2}", r.summary.mean)));
    rows.push(field("worst TC", &|r| format!("{:.2}", r.summary.worst)));
    rows.push(field("feasible", &|r| {
        format!("{}/{}", r.summary.feasible_trials, r.trials.len())
    }));
    rows.push(field("mean t", &|r| {
        r.timing.as_ref().map_or(String::new(), |t| format!("{:.4}", t.mean))
    }));

    let label_width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(5);
    let widths: Vec<usize> = (0..cols.len())
        .map(|c| {
            rows.iter()
                .map(|(_, v)| v[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let _ = write!(out, "{:label_width$}", "");
    for (h, w) in header.iter().zip(&widths) {
        let _ = write!(out, "  {h:>w$}");
    }
    out.push('\n');
    for (label, values) in &rows {
        let _ = write!(out, "{label:label_width$}");
        for (v, w) in values.iter().zip(&widths) {
            let _ = write!(out, "  {v:>w$}");
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
    }
    out
}
