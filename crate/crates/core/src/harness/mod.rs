//! Problem files, multi-trial experiments, reports and trace export.

pub mod experiment;
pub mod problem_file;
pub mod trace;

pub use experiment::{
    render_table, run_experiment, run_on, ExperimentReport, ExperimentSpec, Summary, Timing, TrialRecord, TrialReport,
    DEFAULT_TRIALS,
};
pub use problem_file::{load_problem, load_problem_data, parse_problem, ProblemData};
pub use trace::{export_trace, parse_trace, read_trace, write_trace};
