//! Price penalty factors: the $/kg conversion that folds emissions into the
//! cost objective.
//!
//! For each unit the ratio of fuel cost to emission at full output is taken.
//! Units are then ranked by that ratio and their capacities accumulated until
//! the running total covers the demand; the ratio of the unit that closes the
//! gap is the factor for that demand.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{DispatchError, Result};
use crate::model::{DispatchProblem, Gas};

/// Per-gas penalty factors ($/kg), tied to the demand they were computed for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyFactors {
    demand: f64,
    factors: BTreeMap<Gas, f64>,
}

impl PenaltyFactors {
    pub fn new(demand: f64, factors: impl IntoIterator<Item = (Gas, f64)>) -> Result<Self> {
        let factors: BTreeMap<Gas, f64> = factors.into_iter().collect();
        for (gas, h) in &factors {
            if !(h.is_finite() && *h > 0.0) {
                return Err(DispatchError::invalid(
                    format!("h_{}", gas.key()),
                    format!("penalty factor must be positive, got {h}"),
                ));
            }
        }
        Ok(Self { demand, factors })
    }

    /// Factors for a problem with no gases (a pure cost dispatch).
    pub fn none(demand: f64) -> Self {
        Self {
            demand,
            factors: BTreeMap::new(),
        }
    }

    pub fn demand(&self) -> f64 {
        self.demand
    }

    pub fn get(&self, gas: Gas) -> Result<f64> {
        self.factors
            .get(&gas)
            .copied()
            .ok_or(DispatchError::MissingPenaltyFactor(gas))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Gas, f64)> + '_ {
        self.factors.iter().map(|(g, h)| (*g, *h))
    }

    pub(crate) fn matches_demand(&self, demand: f64) -> bool {
        (self.demand - demand).abs() <= 1e-9 * demand.abs().max(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitRatio {
    pub unit_id: usize,
    /// Fuel cost over emission at `p_max`, $/kg.
    pub ratio: f64,
    pub p_max: f64,
}

/// Cost-to-emission ratio of every unit at full output, in unit order.
pub fn unit_ratios(problem: &DispatchProblem, gas: Gas) -> Result<Vec<UnitRatio>> {
    if !problem.gases().contains(&gas) {
        return Err(DispatchError::UnknownGas(gas));
    }
    problem
        .units()
        .iter()
        .map(|unit| {
            let emission = unit.emission(gas, unit.p_max)?;
            let ratio = unit.fuel_cost(unit.p_max) / emission;
            if emission == 0.0 || !ratio.is_finite() || ratio <= 0.0 {
                return Err(DispatchError::DegenerateRatio {
                    unit: unit.id,
                    gas,
                    value: emission,
                });
            }
            Ok(UnitRatio {
                unit_id: unit.id,
                ratio,
                p_max: unit.p_max,
            })
        })
        .collect()
}

/// Ranks `ratios` ascending (ties by unit id) and returns the ratio of the
/// unit whose capacity first brings the running total to `demand` or more.
///
/// Returns `None` only when the total capacity falls short of `demand`.
pub fn select_by_merit(ratios: &[UnitRatio], demand: f64) -> Option<f64> {
    let mut ranked: Vec<&UnitRatio> = ratios.iter().collect();
    ranked.sort_by(|a, b| a.ratio.total_cmp(&b.ratio).then(a.unit_id.cmp(&b.unit_id)));
    let mut capacity = 0.0;
    for r in ranked {
        capacity += r.p_max;
        if capacity >= demand {
            return Some(r.ratio);
        }
    }
    None
}

pub fn penalty_factor(problem: &DispatchProblem, gas: Gas) -> Result<f64> {
    let ratios = unit_ratios(problem, gas)?;
    select_by_merit(&ratios, problem.demand()).ok_or_else(|| {
        let (min, max) = problem.capacity();
        DispatchError::Infeasible {
            demand: problem.demand(),
            min,
            max,
        }
    })
}

/// Penalty factors for every gas of the problem at its demand.
pub fn penalty_factors_all(problem: &DispatchProblem) -> Result<PenaltyFactors> {
    let factors = problem
        .gases()
        .iter()
        .map(|&gas| Ok((gas, penalty_factor(problem, gas)?)))
        .collect::<Result<Vec<_>>>()?;
    PenaltyFactors::new(problem.demand(), factors)
}
