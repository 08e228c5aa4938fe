//! JSON problem files.
//!
//! ```json
//! {
//!   "name": "two-unit",
//!   "demand": 300,
//!   "gases": ["nox"],
//!   "units": [
//!     {"id": 1, "p_min": 10, "p_max": 200, "cost": [100, 2.0, 0.01],
//!      "emissions": {"nox": [5, 0.1, 0.002]}}
//!   ],
//!   "b_matrix": [[1e-4]]
//! }
//! ```
//!
//! `demand` and `b_matrix` are optional; the demand can also be supplied when
//! a [`DispatchProblem`] is built from the loaded data.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DispatchError, Result};
use crate::model::{DispatchProblem, Gas, GeneratorUnit, LossMatrix, Weights};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    note: Option<String>,
    #[serde(default)]
    demand: Option<f64>,
    gases: Vec<Gas>,
    units: Vec<GeneratorUnit>,
    #[serde(default)]
    b_matrix: Option<Vec<Vec<f64>>>,
}

/// Validated unit data, independent of any particular demand.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub name: Option<String>,
    pub note: Option<String>,
    pub demand: Option<f64>,
    pub gases: Vec<Gas>,
    pub units: Vec<GeneratorUnit>,
    pub losses: Option<LossMatrix>,
}

impl ProblemData {
    pub fn problem(&self, demand: f64, weights: Weights) -> Result<DispatchProblem> {
        DispatchProblem::new(
            self.units.clone(),
            demand,
            self.losses.clone(),
            self.gases.iter().copied(),
            weights,
        )
    }

    /// Problem at the file's own demand.
    pub fn default_problem(&self, weights: Weights) -> Result<DispatchProblem> {
        let demand = self
            .demand
            .ok_or_else(|| DispatchError::invalid("demand", "not given in the problem file"))?;
        self.problem(demand, weights)
    }
}

pub fn parse_problem(text: &str) -> Result<ProblemData> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| DispatchError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.units.is_empty() {
        return Err(DispatchError::invalid("units", "at least one unit is required"));
    }
    for (i, unit) in file.units.iter().enumerate() {
        unit.validate().map_err(|e| match e {
            DispatchError::Invalid { field, reason } => DispatchError::invalid(format!("units[{i}] ({field})"), reason),
            other => other,
        })?;
        for gas in &file.gases {
            unit.emission_curve(*gas)?;
        }
    }
    let losses = file.b_matrix.map(LossMatrix::new).transpose()?;
    if let Some(b) = &losses {
        if b.dim() != file.units.len() {
            return Err(DispatchError::invalid(
                "b_matrix",
                format!("dimension {} does not match {} units", b.dim(), file.units.len()),
            ));
        }
    }
    let mut gases = file.gases;
    gases.sort();
    gases.dedup();
    Ok(ProblemData {
        name: file.name,
        note: file.note,
        demand: file.demand,
        gases,
        units: file.units,
        losses,
    })
}

pub fn load_problem_data(path: impl AsRef<Path>) -> Result<ProblemData> {
    parse_problem(&std::fs::read_to_string(path)?)
}

/// Loads a file that carries its own `demand`, with both objectives active.
pub fn load_problem(path: impl AsRef<Path>) -> Result<DispatchProblem> {
    load_problem_data(path)?.default_problem(Weights::COMBINED)
}
