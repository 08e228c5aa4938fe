//! Generator data, dispatch problems and the objective/constraint evaluators.
//!
//! Powers are in MW, fuel costs in $/h and emissions in kg/h throughout.
//! Nothing in here clamps: a power vector outside the unit limits is still
//! evaluated, and [`DispatchProblem::check_limits`] reports how far out it is.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DispatchError, Result};
use crate::penalty::PenaltyFactors;

/// Balance tolerance (MW) used to classify a dispatch as feasible.
pub const BALANCE_TOLERANCE: f64 = 1e-6;

/// Relative asymmetry tolerated in a loss matrix before it is rejected.
pub const LOSS_SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gas {
    Nox,
    Cox,
    Sox,
}

impl Gas {
    pub const ALL: [Gas; 3] = [Gas::Nox, Gas::Cox, Gas::Sox];

    pub fn key(self) -> &'static str {
        match self {
            Gas::Nox => "nox",
            Gas::Cox => "cox",
            Gas::Sox => "sox",
        }
    }
}

impl fmt::Display for Gas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gas::Nox => "NOx",
            Gas::Cox => "COx",
            Gas::Sox => "SOx",
        })
    }
}

impl FromStr for Gas {
    type Err = DispatchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nox" => Ok(Gas::Nox),
            "cox" => Ok(Gas::Cox),
            "sox" => Ok(Gas::Sox),
            other => Err(DispatchError::invalid("gas", format!("unknown gas `{other}`"))),
        }
    }
}

/// `constant + linear·p + quadratic·p²`. Serialized as a three-element array.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Quadratic {
    pub constant: f64,
    pub linear: f64,
    pub quadratic: f64,
}

impl Quadratic {
    pub const fn new(constant: f64, linear: f64, quadratic: f64) -> Self {
        Self {
            constant,
            linear,
            quadratic,
        }
    }

    #[inline]
    pub fn eval(&self, p: f64) -> f64 {
        self.constant + self.linear * p + self.quadratic * p * p
    }

    #[inline]
    pub fn derivative(&self, p: f64) -> f64 {
        self.linear + 2.0 * self.quadratic * p
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(k * self.constant, k * self.linear, k * self.quadratic)
    }

    fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.linear.is_finite() && self.quadratic.is_finite()
    }
}

impl std::ops::Add for Quadratic {
    type Output = Quadratic;

    fn add(self, rhs: Quadratic) -> Quadratic {
        Quadratic::new(
            self.constant + rhs.constant,
            self.linear + rhs.linear,
            self.quadratic + rhs.quadratic,
        )
    }
}

impl From<[f64; 3]> for Quadratic {
    fn from(c: [f64; 3]) -> Self {
        Quadratic::new(c[0], c[1], c[2])
    }
}

impl From<Quadratic> for [f64; 3] {
    fn from(q: Quadratic) -> Self {
        [q.constant, q.linear, q.quadratic]
    }
}

/// One committed thermal unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorUnit {
    /// 1-based unit number.
    pub id: usize,
    pub p_min: f64,
    pub p_max: f64,
    /// Fuel cost curve `a + b·p + c·p²`.
    pub cost: Quadratic,
    /// Emission curve `α + β·p + γ·p²` per gas.
    #[serde(default)]
    pub emissions: BTreeMap<Gas, Quadratic>,
}

impl GeneratorUnit {
    pub fn new(id: usize, p_min: f64, p_max: f64, cost: Quadratic) -> Self {
        Self {
            id,
            p_min,
            p_max,
            cost,
            emissions: BTreeMap::new(),
        }
    }

    pub fn with_emission(mut self, gas: Gas, curve: Quadratic) -> Self {
        self.emissions.insert(gas, curve);
        self
    }

    /// Fuel cost in $/h at output `p`.
    #[inline]
    pub fn fuel_cost(&self, p: f64) -> f64 {
        self.cost.eval(p)
    }

    pub fn emission_curve(&self, gas: Gas) -> Result<&Quadratic> {
        self.emissions.get(&gas).ok_or_else(|| {
            DispatchError::invalid(
                format!("unit {}.emissions", self.id),
                format!("no coefficients for {gas}"),
            )
        })
    }

    pub fn emission(&self, gas: Gas, p: f64) -> Result<f64> {
        Ok(self.emission_curve(gas)?.eval(p))
    }

    #[inline]
    pub fn range(&self) -> f64 {
        self.p_max - self.p_min
    }

    #[inline]
    pub fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.p_min, self.p_max)
    }

    /// Checks limits and coefficients.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str| format!("unit {}.{}", self.id, name);
        if !self.p_min.is_finite() || !self.p_max.is_finite() {
            return Err(DispatchError::invalid(field("limits"), "limits must be finite"));
        }
        if self.p_min < 0.0 {
            return Err(DispatchError::invalid(
                field("p_min"),
                format!("p_min {} is negative", self.p_min),
            ));
        }
        if self.p_min >= self.p_max {
            return Err(DispatchError::invalid(
                field("p_min"),
                format!("p_min {} is not below p_max {}", self.p_min, self.p_max),
            ));
        }
        if !self.cost.is_finite() {
            return Err(DispatchError::invalid(field("cost"), "non-finite coefficient"));
        }
        for (gas, curve) in &self.emissions {
            if !curve.is_finite() {
                return Err(DispatchError::invalid(
                    field(&format!("emissions.{}", gas.key())),
                    "non-finite coefficient",
                ));
            }
        }
        Ok(())
    }
}

/// Symmetric B-coefficient matrix in 1/MW, so that `pᵀ·B·p` is in MW.
#[derive(Clone, Debug, PartialEq)]
pub struct LossMatrix {
    n: usize,
    data: Vec<f64>,
}

impl LossMatrix {
    /// Builds a loss matrix from rows. Asymmetry up to
    /// [`LOSS_SYMMETRY_TOLERANCE`] (relative to the largest entry) is averaged
    /// away with a warning; anything larger is rejected.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(DispatchError::invalid("b_matrix", "matrix is empty"));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(DispatchError::invalid(
                    format!("b_matrix[{i}]"),
                    format!("row has {} entries, expected {n}", row.len()),
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(DispatchError::invalid(format!("b_matrix[{i}]"), "non-finite entry"));
            }
            data.extend(row);
        }
        let scale = data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((data[i * n + j] - data[j * n + i]).abs());
            }
        }
        if worst > LOSS_SYMMETRY_TOLERANCE * scale {
            return Err(DispatchError::invalid(
                "b_matrix",
                format!("asymmetry {worst:e} exceeds relative tolerance {LOSS_SYMMETRY_TOLERANCE:e}"),
            ));
        }
        if worst > 0.0 {
            log::warn!("b_matrix asymmetry {worst:e} within tolerance; symmetrizing");
            for i in 0..n {
                for j in (i + 1)..n {
                    let avg = 0.5 * (data[i * n + j] + data[j * n + i]);
                    data[i * n + j] = avg;
                    data[j * n + i] = avg;
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// `pᵀ·B·p` without a dimension check.
    #[inline]
    pub(crate) fn quadratic_form(&self, powers: &[f64]) -> f64 {
        let mut total = 0.0;
        for (m, pm) in powers.iter().enumerate() {
            let row = &self.data[m * self.n..(m + 1) * self.n];
            let inner: f64 = row.iter().zip(powers).map(|(b, pn)| b * pn).sum();
            total += pm * inner;
        }
        total
    }
}

/// Transmission loss `Σ_m Σ_n p_m·B_mn·p_n` in MW.
pub fn transmission_loss(powers: &[f64], b: &LossMatrix) -> Result<f64> {
    if powers.len() != b.dim() {
        return Err(DispatchError::DimensionMismatch {
            expected: b.dim(),
            got: powers.len(),
        });
    }
    Ok(b.quadratic_form(powers))
}

/// The binary switches on the fuel-cost and emission terms of the objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Weights {
    pub k1: bool,
    pub k2: bool,
}

impl Weights {
    pub const COMBINED: Weights = Weights { k1: true, k2: true };
    pub const COST_ONLY: Weights = Weights { k1: true, k2: false };
    pub const EMISSION_ONLY: Weights = Weights { k1: false, k2: true };

    pub fn from_flags(k1: u8, k2: u8) -> Result<Self> {
        let flag = |name: &str, v: u8| match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(DispatchError::invalid(name, format!("must be 0 or 1, got {v}"))),
        };
        Ok(Weights {
            k1: flag("k1", k1)?,
            k2: flag("k2", k2)?,
        })
    }

    #[inline]
    pub fn fuel(&self) -> f64 {
        if self.k1 {
            1.0
        } else {
            0.0
        }
    }

    #[inline]
    pub fn emission(&self) -> f64 {
        if self.k2 {
            1.0
        } else {
            0.0
        }
    }
}

impl Default for Weights {
    fn default() -> Self {
        Weights::COMBINED
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitViolation {
    pub unit_id: usize,
    /// Signed distance to the violated bound: positive above `p_max`, negative below `p_min`.
    pub amount: f64,
}

/// A validated dispatch instance. Immutable once built.
#[derive(Clone, Debug)]
pub struct DispatchProblem {
    units: Vec<GeneratorUnit>,
    demand: f64,
    losses: Option<LossMatrix>,
    gases: BTreeSet<Gas>,
    weights: Weights,
}

impl DispatchProblem {
    pub fn new(
        units: Vec<GeneratorUnit>,
        demand: f64,
        losses: Option<LossMatrix>,
        gases: impl IntoIterator<Item = Gas>,
        weights: Weights,
    ) -> Result<Self> {
        if units.is_empty() {
            return Err(DispatchError::invalid("units", "at least one unit is required"));
        }
        let mut seen = BTreeSet::new();
        for unit in &units {
            unit.validate()?;
            if !seen.insert(unit.id) {
                return Err(DispatchError::invalid(
                    format!("unit {}.id", unit.id),
                    "duplicate unit id",
                ));
            }
        }
        let gases: BTreeSet<Gas> = gases.into_iter().collect();
        for unit in &units {
            for gas in &gases {
                unit.emission_curve(*gas)?;
            }
        }
        if let Some(b) = &losses {
            if b.dim() != units.len() {
                return Err(DispatchError::invalid(
                    "b_matrix",
                    format!("dimension {} does not match {} units", b.dim(), units.len()),
                ));
            }
        }
        if !weights.k1 && !weights.k2 {
            return Err(DispatchError::invalid("k1/k2", "at least one objective must be active"));
        }
        let problem = Self {
            units,
            demand,
            losses,
            gases,
            weights,
        };
        problem.check_demand()?;
        Ok(problem)
    }

    fn check_demand(&self) -> Result<()> {
        let (min, max) = self.capacity();
        if !self.demand.is_finite() || self.demand < min || self.demand > max {
            return Err(DispatchError::Infeasible {
                demand: self.demand,
                min,
                max,
            });
        }
        Ok(())
    }

    /// Same units and settings at a different demand.
    pub fn with_demand(&self, demand: f64) -> Result<Self> {
        let problem = Self { demand, ..self.clone() };
        problem.check_demand()?;
        Ok(problem)
    }

    pub fn with_weights(&self, weights: Weights) -> Result<Self> {
        if !weights.k1 && !weights.k2 {
            return Err(DispatchError::invalid("k1/k2", "at least one objective must be active"));
        }
        Ok(Self {
            weights,
            ..self.clone()
        })
    }

    pub fn units(&self) -> &[GeneratorUnit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn demand(&self) -> f64 {
        self.demand
    }

    pub fn losses(&self) -> Option<&LossMatrix> {
        self.losses.as_ref()
    }

    pub fn gases(&self) -> &BTreeSet<Gas> {
        &self.gases
    }

    pub fn weights(&self) -> Weights {
        self.weights
    }

    /// `(Σ p_min, Σ p_max)`.
    pub fn capacity(&self) -> (f64, f64) {
        self.units
            .iter()
            .fold((0.0, 0.0), |(lo, hi), u| (lo + u.p_min, hi + u.p_max))
    }

    fn check_dim(&self, powers: &[f64]) -> Result<()> {
        if powers.len() != self.units.len() {
            return Err(DispatchError::DimensionMismatch {
                expected: self.units.len(),
                got: powers.len(),
            });
        }
        Ok(())
    }

    pub fn total_fuel_cost(&self, powers: &[f64]) -> Result<f64> {
        self.check_dim(powers)?;
        Ok(self.units.iter().zip(powers).map(|(u, &p)| u.fuel_cost(p)).sum())
    }

    pub fn gas_emission(&self, powers: &[f64], gas: Gas) -> Result<f64> {
        self.check_dim(powers)?;
        if !self.gases.contains(&gas) {
            return Err(DispatchError::UnknownGas(gas));
        }
        let mut total = 0.0;
        for (u, &p) in self.units.iter().zip(powers) {
            total += u.emission(gas, p)?;
        }
        Ok(total)
    }

    /// Transmission loss in MW; zero for a lossless problem.
    pub fn loss(&self, powers: &[f64]) -> Result<f64> {
        self.check_dim(powers)?;
        Ok(self.losses.as_ref().map_or(0.0, |b| b.quadratic_form(powers)))
    }

    /// `Σ p_i − P_D − P_L(p)`.
    pub fn balance_residual(&self, powers: &[f64]) -> Result<f64> {
        let loss = self.loss(powers)?;
        Ok(powers.iter().sum::<f64>() - self.demand - loss)
    }

    pub fn check_limits(&self, powers: &[f64]) -> Result<Vec<LimitViolation>> {
        self.check_dim(powers)?;
        Ok(self
            .units
            .iter()
            .zip(powers)
            .filter_map(|(u, &p)| {
                let amount = if p > u.p_max {
                    p - u.p_max
                } else if p < u.p_min {
                    p - u.p_min
                } else {
                    return None;
                };
                Some(LimitViolation { unit_id: u.id, amount })
            })
            .collect())
    }

    fn check_factors(&self, h: &PenaltyFactors) -> Result<()> {
        if !h.matches_demand(self.demand) {
            return Err(DispatchError::DemandMismatch {
                factors: h.demand(),
                problem: self.demand,
            });
        }
        for gas in &self.gases {
            h.get(*gas)?;
        }
        Ok(())
    }

    /// `k1·F_T + k2·Σ_g h_g·E_g` in $/h.
    pub fn combined_objective(&self, powers: &[f64], h: &PenaltyFactors) -> Result<f64> {
        self.check_factors(h)?;
        let fuel = self.total_fuel_cost(powers)?;
        let mut emission_cost = 0.0;
        for gas in &self.gases {
            emission_cost += h.get(*gas)? * self.gas_emission(powers, *gas)?;
        }
        Ok(self.weights.fuel() * fuel + self.weights.emission() * emission_cost)
    }

    /// Folds the weights and penalty factors into one quadratic per unit.
    pub fn scalarize(&self, h: &PenaltyFactors) -> Result<ScalarizedObjective> {
        self.check_factors(h)?;
        let mut curves = Vec::with_capacity(self.units.len());
        for unit in &self.units {
            let mut curve = unit.cost.scaled(self.weights.fuel());
            for gas in &self.gases {
                let hg = h.get(*gas)? * self.weights.emission();
                curve = curve + unit.emission_curve(*gas)?.scaled(hg);
            }
            curves.push(curve);
        }
        Ok(ScalarizedObjective { curves })
    }

    /// Evaluates every reported quantity at `powers`.
    pub fn evaluate(&self, powers: &[f64], h: &PenaltyFactors) -> Result<DispatchSolution> {
        self.check_factors(h)?;
        let fuel_cost = self.total_fuel_cost(powers)?;
        let mut emissions = BTreeMap::new();
        let mut emission_cost = 0.0;
        for gas in &self.gases {
            let e = self.gas_emission(powers, *gas)?;
            emission_cost += h.get(*gas)? * e;
            emissions.insert(*gas, e);
        }
        let total_cost = self.weights.fuel() * fuel_cost + self.weights.emission() * emission_cost;
        Ok(DispatchSolution {
            powers: powers.to_vec(),
            fuel_cost,
            emissions,
            emission_cost,
            total_cost,
            balance_residual: self.balance_residual(powers)?,
            limit_violations: self.check_limits(powers)?,
        })
    }
}

/// The combined objective with weights and penalty factors folded in:
/// one quadratic per unit, summed.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarizedObjective {
    curves: Vec<Quadratic>,
}

impl ScalarizedObjective {
    pub fn curves(&self) -> &[Quadratic] {
        &self.curves
    }

    #[inline]
    pub fn value(&self, powers: &[f64]) -> f64 {
        debug_assert_eq!(powers.len(), self.curves.len());
        self.curves.iter().zip(powers).map(|(q, &p)| q.eval(p)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub powers: Vec<f64>,
    /// F_T, $/h.
    pub fuel_cost: f64,
    /// E_T per gas, kg/h.
    pub emissions: BTreeMap<Gas, f64>,
    /// Σ_g h_g·E_g, $/h.
    pub emission_cost: f64,
    /// k1·FC + k2·EC, $/h.
    pub total_cost: f64,
    pub balance_residual: f64,
    pub limit_violations: Vec<LimitViolation>,
}

impl DispatchSolution {
    pub fn is_feasible(&self) -> bool {
        self.limit_violations.is_empty() && self.balance_residual.abs() <= BALANCE_TOLERANCE
    }
}
