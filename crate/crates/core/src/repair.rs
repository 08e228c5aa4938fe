//! Balance repair: moves a candidate dispatch onto `Σ p = P_D + P_L` while
//! keeping every unit inside its limits.
//!
//! Lossless: scale by `target / Σp`, re-clamp, repeat; whatever is left over
//! goes to the units with the most headroom. With a loss matrix the target
//! itself depends on the dispatch, so the lossless step is wrapped in a
//! fixed-point iteration on `P_D + P_L(p)`.

use crate::model::{DispatchProblem, BALANCE_TOLERANCE};

pub const SCALING_ROUNDS: usize = 10;
pub const LOSS_ROUNDS: usize = 20;

pub fn clamp_to_limits(problem: &DispatchProblem, powers: &mut [f64]) {
    for (p, unit) in powers.iter_mut().zip(problem.units()) {
        *p = unit.clamp(*p);
    }
}

/// Clamps and repairs `powers` in place; returns the remaining balance residual (MW).
pub fn repair_balance(problem: &DispatchProblem, powers: &mut [f64]) -> f64 {
    debug_assert_eq!(powers.len(), problem.len());
    clamp_to_limits(problem, powers);
    match problem.losses() {
        None => {
            balance_to(problem, powers, problem.demand());
            powers.iter().sum::<f64>() - problem.demand()
        }
        Some(b) => {
            for _ in 0..LOSS_ROUNDS {
                let target = problem.demand() + b.quadratic_form(powers);
                if (powers.iter().sum::<f64>() - target).abs() <= BALANCE_TOLERANCE {
                    break;
                }
                balance_to(problem, powers, target);
            }
            powers.iter().sum::<f64>() - problem.demand() - b.quadratic_form(powers)
        }
    }
}

fn balance_to(problem: &DispatchProblem, powers: &mut [f64], target: f64) {
    let units = problem.units();
    let close = |sum: f64| (sum - target).abs() <= 1e-12 * target.abs().max(1.0);
    for _ in 0..SCALING_ROUNDS {
        let sum: f64 = powers.iter().sum();
        if close(sum) || sum <= 0.0 {
            break;
        }
        let scale = target / sum;
        for (p, unit) in powers.iter_mut().zip(units) {
            *p = unit.clamp(*p * scale);
        }
    }

    let mut remainder = target - powers.iter().sum::<f64>();
    if remainder == 0.0 {
        return;
    }
    let up = remainder > 0.0;
    let headroom = |i: usize, p: f64| {
        if up {
            units[i].p_max - p
        } else {
            p - units[i].p_min
        }
    };
    let mut order: Vec<usize> = (0..powers.len()).collect();
    order.sort_by(|&a, &b| {
        headroom(b, powers[b])
            .total_cmp(&headroom(a, powers[a]))
            .then(a.cmp(&b))
    });
    for i in order {
        let step = remainder.abs().min(headroom(i, powers[i]).max(0.0));
        if up {
            powers[i] += step;
            remainder -= step;
        } else {
            powers[i] -= step;
            remainder += step;
        }
        if remainder == 0.0 {
            break;
        }
    }
}
