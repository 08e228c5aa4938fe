//! The shipped six-unit data evaluated at the published dispatches.

use ceed_core::harness::parse_problem;
use ceed_core::oracle::{lambda_solve, DEFAULT_TOLERANCE};
use ceed_core::{penalty_factors_all, Gas, Weights, IEEE30_6UNIT};

// (demand, powers, FC, NOx, COx, SOx)
const DISPATCHES: [(f64, [f64; 6], f64, [f64; 3]); 4] = [
    (
        1500.0,
        [195.79, 256.55, 381.25, 81.69, 381.85, 202.27],
        14827.57,
        [1719.67, 39626.51, 9623.04],
    ),
    (
        1500.0,
        [224.0, 255.0, 367.0, 84.0, 367.0, 203.0],
        14833.87,
        [1748.28, 38949.38, 9669.29],
    ),
    (
        2000.0,
        [256.32, 320.57, 541.95, 133.10, 500.0, 248.06],
        19445.29,
        [2540.68, 73738.76, 13601.05],
    ),
    (
        2000.0,
        [256.0, 320.0, 576.0, 119.0, 500.0, 229.0],
        19465.34,
        [2573.48, 75848.25, 13221.23],
    ),
];

#[test]
fn published_dispatches_evaluate_to_published_costs() {
    let data = parse_problem(IEEE30_6UNIT).unwrap();
    for (demand, powers, fc, emissions) in DISPATCHES {
        let problem = data.problem(demand, Weights::COMBINED).unwrap();
        let got = problem.total_fuel_cost(&powers).unwrap();
        assert!((got - fc).abs() <= 1e-3 * fc, "{demand} MW FC {got} vs {fc}");
        for (gas, want) in [Gas::Nox, Gas::Cox, Gas::Sox].into_iter().zip(emissions) {
            let e = problem.gas_emission(&powers, gas).unwrap();
            assert!((e - want).abs() <= 1e-3 * want, "{demand} MW {gas} {e} vs {want}");
        }
    }
}

#[test]
fn lambda_optimum_is_close_to_the_published_swarm_result() {
    let data = parse_problem(IEEE30_6UNIT).unwrap();
    for (demand, tc) in [(1500.0, 33948.83), (2000.0, 56988.30)] {
        let problem = data.problem(demand, Weights::COMBINED).unwrap();
        let h = penalty_factors_all(&problem).unwrap();
        let r = lambda_solve(&problem, &h, DEFAULT_TOLERANCE).unwrap();
        let best = problem.combined_objective(&r.powers, &h).unwrap();
        assert!((best - tc).abs() <= 1e-3 * tc, "{demand} MW optimum {best} vs {tc}");
    }
}
