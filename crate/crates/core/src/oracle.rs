//! Reference solvers for checking the metaheuristics.
//!
//! [`lambda_solve`] is the classical equal-incremental-cost method for smooth
//! lossless dispatch: with the weights and penalty factors folded in, each
//! unit's objective is `b̂·p + ĉ·p²` (plus a constant), so its output at a
//! system incremental cost λ is `clamp((λ − b̂) / 2ĉ)` and λ is found by
//! bisection. [`grid_search`] is brute force for tiny instances.

use serde::{Deserialize, Serialize};

use crate::error::{DispatchError, Result};
use crate::model::{DispatchProblem, DispatchSolution};
use crate::penalty::PenaltyFactors;

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const MAX_BISECTION_STEPS: usize = 200;
pub const MAX_GRID_UNITS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaResult {
    /// System incremental cost, $/MWh.
    pub lambda: f64,
    pub powers: Vec<f64>,
    pub iterations: usize,
    /// `Σ p − P_D`, MW.
    pub residual: f64,
}

pub fn lambda_solve(problem: &DispatchProblem, h: &PenaltyFactors, tol: f64) -> Result<LambdaResult> {
    if problem.losses().is_some() {
        return Err(DispatchError::Unsupported(
            "lambda iteration here covers lossless dispatch only".into(),
        ));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(DispatchError::invalid("tol", format!("must be positive, got {tol}")));
    }
    let (min, max) = problem.capacity();
    let demand = problem.demand();
    if demand < min || demand > max {
        return Err(DispatchError::Infeasible { demand, min, max });
    }
    let objective = problem.scalarize(h)?;
    let units = problem.units();
    let curves = objective.curves();
    for (unit, q) in units.iter().zip(curves) {
        if q.quadratic.is_nan() || q.quadratic <= 0.0 {
            return Err(DispatchError::Unsupported(format!(
                "unit {} has non-positive effective quadratic coefficient {}",
                unit.id, q.quadratic
            )));
        }
    }

    let dispatch = |lambda: f64| -> Vec<f64> {
        units
            .iter()
            .zip(curves)
            .map(|(u, q)| u.clamp((lambda - q.linear) / (2.0 * q.quadratic)))
            .collect()
    };

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (u, q) in units.iter().zip(curves) {
        lo = lo.min(q.derivative(u.p_min));
        hi = hi.max(q.derivative(u.p_max));
    }

    let mut lambda = 0.5 * (lo + hi);
    let mut powers = dispatch(lambda);
    let mut residual = powers.iter().sum::<f64>() - demand;
    let mut iterations = 0;
    while iterations < MAX_BISECTION_STEPS && residual.abs() > tol {
        if residual < 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        lambda = 0.5 * (lo + hi);
        powers = dispatch(lambda);
        residual = powers.iter().sum::<f64>() - demand;
        iterations += 1;
    }
    Ok(LambdaResult {
        lambda,
        powers,
        iterations,
        residual,
    })
}

fn grid_axis(p_min: f64, p_max: f64, resolution: f64) -> Vec<f64> {
    let steps = ((p_max - p_min) / resolution).floor() as usize;
    let mut axis: Vec<f64> = (0..=steps).map(|k| p_min + k as f64 * resolution).collect();
    if axis.last().is_some_and(|&last| p_max - last > 1e-9 * resolution) {
        axis.push(p_max);
    }
    axis
}

/// Output of the last unit that closes the balance given the others.
fn closing_output(problem: &DispatchProblem, others: &[f64]) -> Option<f64> {
    let n = problem.len();
    let committed: f64 = others.iter().sum();
    let Some(b) = problem.losses() else {
        return Some(problem.demand() - committed);
    };
    // Σo + x = D + s + 2·t·x + b_nn·x²
    let last = n - 1;
    let mut s = 0.0;
    let mut t = 0.0;
    for (m, pm) in others.iter().enumerate() {
        for (k, pk) in others.iter().enumerate() {
            s += pm * b.get(m, k) * pk;
        }
        t += b.get(m, last) * pm;
    }
    let bnn = b.get(last, last);
    let c = s + problem.demand() - committed;
    let lin = 1.0 - 2.0 * t;
    if bnn == 0.0 {
        return (lin != 0.0).then(|| c / lin);
    }
    let disc = lin * lin - 4.0 * bnn * c;
    if disc < 0.0 {
        return None;
    }
    // smaller root, in a cancellation-free form
    let denom = lin + disc.sqrt();
    (denom != 0.0).then(|| 2.0 * c / denom)
}

/// Exhaustive search over the first `N − 1` outputs at `resolution` MW; the
/// last unit closes the balance.
pub fn grid_search(problem: &DispatchProblem, h: &PenaltyFactors, resolution: f64) -> Result<DispatchSolution> {
    let n = problem.len();
    if n > MAX_GRID_UNITS {
        return Err(DispatchError::Unsupported(format!(
            "grid search is limited to {MAX_GRID_UNITS} units, got {n}"
        )));
    }
    if resolution.is_nan() || resolution <= 0.0 {
        return Err(DispatchError::invalid(
            "resolution",
            format!("must be positive, got {resolution}"),
        ));
    }
    let objective = problem.scalarize(h)?;
    let units = problem.units();
    let axes: Vec<Vec<f64>> = units[..n - 1]
        .iter()
        .map(|u| grid_axis(u.p_min, u.p_max, resolution))
        .collect();

    let last = &units[n - 1];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut candidate = vec![0.0; n];
    let mut index = vec![0usize; n - 1];
    loop {
        for (d, &k) in index.iter().enumerate() {
            candidate[d] = axes[d][k];
        }
        if let Some(x) = closing_output(problem, &candidate[..n - 1]) {
            if x >= last.p_min && x <= last.p_max {
                candidate[n - 1] = x;
                let value = objective.value(&candidate);
                if best.as_ref().is_none_or(|(v, _)| value < *v) {
                    best = Some((value, candidate.clone()));
                }
            }
        }
        // odometer increment
        let mut d = 0;
        loop {
            if d == index.len() {
                return match best {
                    Some((_, powers)) => problem.evaluate(&powers, h),
                    None => Err(DispatchError::NoFeasibleCandidate(format!(
                        "no grid point at {resolution} MW satisfies balance within limits"
                    ))),
                };
            }
            index[d] += 1;
            if index[d] < axes[d].len() {
                break;
            }
            index[d] = 0;
            d += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GeneratorUnit, LossMatrix, Quadratic, Weights};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cost_only(units: Vec<GeneratorUnit>, demand: f64) -> (DispatchProblem, PenaltyFactors) {
        (
            DispatchProblem::new(units, demand, None, [], Weights::COST_ONLY).unwrap(),
            PenaltyFactors::none(demand),
        )
    }

    fn halves(p_max1: f64) -> (DispatchProblem, PenaltyFactors) {
        cost_only(
            vec![
                GeneratorUnit::new(1, 0.0, p_max1, Quadratic::new(0.0, 0.0, 0.5)),
                GeneratorUnit::new(2, 0.0, 500.0, Quadratic::new(0.0, 0.0, 1.0)),
            ],
            300.0,
        )
    }

    #[test]
    fn single_unit_closed_form() {
        let (p, h) = cost_only(
            vec![GeneratorUnit::new(1, 10.0, 300.0, Quadratic::new(3.0, 7.0, 0.02))],
            150.0,
        );
        let r = lambda_solve(&p, &h, DEFAULT_TOLERANCE).unwrap();
        assert_relative_eq!(r.powers[0], 150.0, epsilon = 1e-6);
        assert_relative_eq!(r.lambda, 7.0 + 2.0 * 0.02 * 150.0, epsilon = 1e-6);
    }

    #[test]
    fn equal_incremental_cost_split() {
        let (p, h) = halves(500.0);
        let r = lambda_solve(&p, &h, DEFAULT_TOLERANCE).unwrap();
        assert_relative_eq!(r.powers[0], 200.0, epsilon = 1e-5);
        assert_relative_eq!(r.powers[1], 100.0, epsilon = 1e-5);
        assert_relative_eq!(r.lambda, 200.0, epsilon = 1e-5);
        assert!(r.residual.abs() <= DEFAULT_TOLERANCE);
    }

    #[test]
    fn bound_unit_hands_remainder_over() {
        let (p, h) = halves(150.0);
        let r = lambda_solve(&p, &h, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.powers[0], 150.0);
        assert_relative_eq!(r.powers[1], 150.0, epsilon = 1e-5);
        assert_relative_eq!(r.lambda, 300.0, epsilon = 1e-4);
    }

    #[test]
    fn lambda_rejects_unsupported_inputs() {
        let linear = GeneratorUnit::new(1, 0.0, 100.0, Quadratic::new(0.0, 5.0, 0.0));
        let (p, h) = cost_only(vec![linear.clone()], 50.0);
        assert!(matches!(lambda_solve(&p, &h, 1e-6), Err(DispatchError::Unsupported(_))));

        let lossy = DispatchProblem::new(
            vec![GeneratorUnit::new(1, 0.0, 100.0, Quadratic::new(0.0, 5.0, 0.1))],
            50.0,
            Some(LossMatrix::zeros(1)),
            [],
            Weights::COST_ONLY,
        )
        .unwrap();
        assert!(matches!(
            lambda_solve(&lossy, &h, 1e-6),
            Err(DispatchError::Unsupported(_))
        ));
    }

    #[test]
    fn grid_single_candidate() {
        let (p, h) = cost_only(
            vec![GeneratorUnit::new(1, 10.0, 300.0, Quadratic::new(3.0, 7.0, 0.02))],
            150.0,
        );
        let s = grid_search(&p, &h, 1.0).unwrap();
        assert_eq!(s.powers, vec![150.0]);
    }

    #[test]
    fn grid_agrees_with_lambda_example() {
        let (p, h) = halves(500.0);
        let s = grid_search(&p, &h, 1.0).unwrap();
        assert!((s.powers[0] - 200.0).abs() <= 1.0);
        assert!((s.powers[1] - 100.0).abs() <= 1.0);
    }

    #[test]
    fn grid_reports_infeasible() {
        // Demand fits the capacity but the losses it induces do not.
        let b = LossMatrix::new(vec![vec![0.01, 0.0], vec![0.0, 0.01]]).unwrap();
        let units = vec![
            GeneratorUnit::new(1, 0.0, 100.0, Quadratic::new(0.0, 1.0, 0.01)),
            GeneratorUnit::new(2, 0.0, 100.0, Quadratic::new(0.0, 1.0, 0.01)),
        ];
        let p = DispatchProblem::new(units, 190.0, Some(b), [], Weights::COST_ONLY).unwrap();
        let err = grid_search(&p, &PenaltyFactors::none(190.0), 1.0).unwrap_err();
        assert!(err.is_infeasible());
    }

    #[test]
    fn grid_lossy_candidates_balance() {
        let b = LossMatrix::new(vec![vec![1e-4, 2e-5], vec![2e-5, 1.5e-4]]).unwrap();
        let units = vec![
            GeneratorUnit::new(1, 10.0, 300.0, Quadratic::new(0.0, 2.0, 0.01)),
            GeneratorUnit::new(2, 10.0, 300.0, Quadratic::new(0.0, 2.5, 0.008)),
        ];
        let p = DispatchProblem::new(units, 250.0, Some(b), [], Weights::COST_ONLY).unwrap();
        let s = grid_search(&p, &PenaltyFactors::none(250.0), 0.5).unwrap();
        assert!(s.balance_residual.abs() < 1e-9, "{}", s.balance_residual);
        assert!(s.limit_violations.is_empty());
    }

    #[test]
    fn grid_refuses_large_instances() {
        let units = (1..=4)
            .map(|i| GeneratorUnit::new(i, 0.0, 100.0, Quadratic::new(0.0, 1.0, 0.01)))
            .collect();
        let (p, h) = cost_only(units, 200.0);
        assert!(matches!(grid_search(&p, &h, 1.0), Err(DispatchError::Unsupported(_))));
    }

    fn instance() -> impl Strategy<Value = (Vec<(f64, f64, f64, f64)>, f64)> {
        (
            prop::collection::vec((0.0..60.0f64, 60.0..200.0f64, 1.0..20.0f64, 0.002..0.05f64), 2..=3),
            0.05..0.95f64,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn oracles_agree_and_kkt_holds((spec, frac) in instance()) {
            let units: Vec<_> = spec.iter().enumerate()
                .map(|(i, &(lo, width, b, c))| GeneratorUnit::new(i + 1, lo, lo + width, Quadratic::new(50.0, b, c)))
                .collect();
            let (lo, hi) = units.iter().fold((0.0, 0.0), |(a, z), u| (a + u.p_min, z + u.p_max));
            let (p, h) = cost_only(units.clone(), lo + frac * (hi - lo));
            let lambda = lambda_solve(&p, &h, DEFAULT_TOLERANCE).unwrap();
            let grid = grid_search(&p, &h, 1.0).unwrap();
            let n = units.len();
            for i in 0..n - 1 {
                prop_assert!((lambda.powers[i] - grid.powers[i]).abs() <= 1.0 + 1e-9,
                    "unit {}: lambda {} grid {}", i + 1, lambda.powers[i], grid.powers[i]);
            }
            prop_assert!((lambda.powers[n - 1] - grid.powers[n - 1]).abs() <= (n - 1) as f64 + 1e-9);

            // interior units share λ; bound units sit on the right side of it
            let c_max = spec.iter().map(|s| s.3).fold(0.0, f64::max);
            for (u, &x) in units.iter().zip(&lambda.powers) {
                let ic = u.cost.derivative(x);
                if x > u.p_min && x < u.p_max {
                    prop_assert!((ic - lambda.lambda).abs() <= 2.0 * DEFAULT_TOLERANCE * c_max + 1e-9);
                } else if x <= u.p_min {
                    prop_assert!(ic >= lambda.lambda - 1e-9);
                } else {
                    prop_assert!(ic <= lambda.lambda + 1e-9);
                }
            }
        }
    }
}
