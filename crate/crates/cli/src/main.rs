use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ceed_core::harness::{load_problem_data, render_table, run_on, ExperimentSpec, ProblemData};
use ceed_core::oracle::{grid_search, lambda_solve, DEFAULT_TOLERANCE, MAX_GRID_UNITS};
use ceed_core::penalty::unit_ratios;
use ceed_core::{penalty_factors_all, DispatchError, DispatchProblem, SolverParams, SolverRegistry, Weights};

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(name = "ceed", version, about = "Combined economic and emission dispatch")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded multi-trial experiments and print the result table.
    Solve(SolveArgs),
    /// Print the price penalty factor of each gas.
    Penalty(ProblemArgs),
    /// Solve with the reference methods (lambda iteration, grid search).
    Oracle(OracleArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Problem file (JSON).
    #[arg(long)]
    problem: PathBuf,
    /// Demand in MW. Defaults to the demand stored in the file.
    #[arg(long)]
    demand: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverChoice {
    Pso,
    Ga,
    Both,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    /// Demand in MW; repeat for several.
    #[arg(long)]
    demand: Vec<f64>,
    #[arg(long, value_enum, default_value = "both")]
    solver: SolverChoice,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Iterations (PSO) or generations (GA).
    #[arg(long)]
    iterations: Option<usize>,
    /// Particles (PSO) or individuals (GA).
    #[arg(long)]
    population: Option<usize>,
    /// Base seed; trial i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
    k1: u8,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
    k2: u8,
    /// Directory for report.json, timing.json, table.txt and traces/.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent trials (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Solver setting as key=value, e.g. p_mutation=0.01 or ga.bits_per_gene=10.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
    k1: u8,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
    k2: u8,
    /// Grid step in MW.
    #[arg(long, default_value_t = 1.0)]
    resolution: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let infeasible = err.chain().any(|e| {
                e.downcast_ref::<DispatchError>()
                    .is_some_and(DispatchError::is_infeasible)
            });
            ExitCode::from(if infeasible { EXIT_INFEASIBLE } else { EXIT_ERROR })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Solve(args) => solve(args),
        Command::Penalty(args) => penalty(args),
        Command::Oracle(args) => oracle(args),
    }
}

fn load(path: &PathBuf) -> Result<ProblemData> {
    load_problem_data(path).with_context(|| format!("loading {}", path.display()))
}

fn build(data: &ProblemData, demand: Option<f64>, weights: Weights) -> Result<DispatchProblem> {
    let problem = match demand {
        Some(d) => data.problem(d, weights)?,
        None => data.default_problem(weights)?,
    };
    Ok(problem)
}

fn solve(args: SolveArgs) -> Result<()> {
    let data = load(&args.problem)?;
    let mut params = SolverParams {
        iterations: args.iterations,
        population: args.population,
        ..SolverParams::default()
    };
    for p in &args.params {
        params.parse_extra(p)?;
    }
    let solvers = match args.solver {
        SolverChoice::Pso => vec!["pso".to_string()],
        SolverChoice::Ga => vec!["ga".to_string()],
        SolverChoice::Both => vec!["pso".to_string(), "ga".to_string()],
    };
    let spec = ExperimentSpec {
        demands: args.demand,
        solvers,
        trials: args.trials,
        params,
        base_seed: args.seed,
        weights: Weights::from_flags(args.k1, args.k2)?,
        workers: args.workers,
        out_dir: args.out.clone(),
        ..ExperimentSpec::new(&args.problem)
    };
    let report = run_on(&data, &spec, &SolverRegistry::with_builtins())?;
    if let Some(dir) = &args.out {
        report
            .write_to(dir)
            .with_context(|| format!("writing results to {}", dir.display()))?;
    }
    print!("{}", render_table(&report));
    Ok(())
}

fn penalty(args: ProblemArgs) -> Result<()> {
    let data = load(&args.problem)?;
    let problem = build(&data, args.demand, Weights::COMBINED)?;
    let h = penalty_factors_all(&problem)?;
    println!("demand {} MW", problem.demand());
    for (gas, value) in h.iter() {
        let mut ratios = unit_ratios(&problem, gas)?;
        ratios.sort_by(|a, b| a.ratio.total_cmp(&b.ratio).then(a.unit_id.cmp(&b.unit_id)));
        let order: Vec<String> = ratios.iter().map(|r| r.unit_id.to_string()).collect();
        println!("h_{gas} = {value:.4} $/kg  (merit order: {})", order.join(" "));
    }
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<()> {
    let data = load(&args.problem.problem)?;
    let problem = build(&data, args.problem.demand, Weights::from_flags(args.k1, args.k2)?)?;
    let h = penalty_factors_all(&problem)?;
    let fmt = |powers: &[f64]| powers.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>().join(" ");

    let lambda = lambda_solve(&problem, &h, DEFAULT_TOLERANCE)?;
    let solution = problem.evaluate(&lambda.powers, &h)?;
    println!(
        "lambda  {:.6} $/MWh after {} bisections",
        lambda.lambda, lambda.iterations
    );
    println!("  powers {}", fmt(&solution.powers));
    println!(
        "  FC {:.4}  EC {:.4}  TC {:.4}  residual {:.3e}",
        solution.fuel_cost, solution.emission_cost, solution.total_cost, solution.balance_residual
    );
    if problem.len() <= MAX_GRID_UNITS {
        let grid = grid_search(&problem, &h, args.resolution)?;
        println!("grid    step {} MW", args.resolution);
        println!("  powers {}", fmt(&grid.powers));
        println!(
            "  FC {:.4}  EC {:.4}  TC {:.4}",
            grid.fuel_cost, grid.emission_cost, grid.total_cost
        );
    }
    Ok(())
}
