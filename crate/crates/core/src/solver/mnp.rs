use std::time::Instant;

use super::{check_dims, CycleRecord, MixedPolicy, PolicyEntry, Solution, SolveConfig, SolveError, SolveTrace, SolverKind, StopReason};
use crate::geometry::{affine_minimizer, ConvexTarget, MeasurementVec};
use crate::oracle::RlOracle;

/// True iff `(x - omega)^T (x - s) <= eps`.
pub fn check_wolfe_criterion(x: &MeasurementVec, omega: &MeasurementVec, s: &MeasurementVec, eps: f64) -> bool {
    (x - omega).dot(&(x - s)) <= eps
}

fn is_duplicate(active: &[PolicyEntry], j: &MeasurementVec) -> bool {
    let scale = j.norm().max(1.0);
    active.iter().any(|e| (&e.measurement - j).norm() <= 1e-12 * scale)
}

/// Modified minimum-norm-point method.
///
/// Each major cycle projects the iterate onto the target, asks the oracle for
/// the policy minimizing `(x - omega)^T J`, and then runs Wolfe's minor cycles
/// with respect to the projection until the active set is a corral. The active
/// set never exceeds `m + 1` policies.
pub fn solve_mnp<O: RlOracle>(oracle: &mut O, target: &ConvexTarget, cfg: &SolveConfig) -> Result<Solution, SolveError> {
    let m = check_dims(oracle, target, cfg)?;
    let exact = oracle.is_exact();
    let mut x = MeasurementVec::zeros(m);
    let mut active: Vec<PolicyEntry> = Vec::new();
    let mut cycles: Vec<CycleRecord> = Vec::new();
    let mut stop_reason = StopReason::MaxCycles;
    let mut calls = 0;

    for t in 1..=cfg.max_major_cycles {
        let started = Instant::now();
        let omega = target.project(&x)?;
        let found = oracle.query(&(&x - &omega))?;
        calls += 1;

        if t >= 2 && check_wolfe_criterion(&x, &omega, &found.measurement, cfg.stop_tolerance) {
            if exact {
                stop_reason = StopReason::WolfeCriterion;
                break;
            }
            let dist_sq = target.squared_distance(&x)?;
            cycles.push(CycleRecord {
                t,
                oracle_calls: t,
                dist_sq,
                err: 0.5 * dist_sq,
                stored_policies: active.len(),
                minor_cycles: 0,
                drop_step: false,
                wall_time: started.elapsed(),
                iterate: x.clone(),
            });
            continue;
        }

        if !is_duplicate(&active, &found.measurement) {
            active.push(PolicyEntry {
                policy: found.policy,
                weight: 0.0,
                measurement: found.measurement,
            });
        }

        let removals = restore_corral(&mut active, &mut x, &omega, cfg.corral_tolerance, t)?;

        let dist_sq = target.squared_distance(&x)?;
        cycles.push(CycleRecord {
            t,
            oracle_calls: t,
            dist_sq,
            err: 0.5 * dist_sq,
            stored_policies: active.len(),
            minor_cycles: removals,
            drop_step: removals >= 1,
            wall_time: started.elapsed(),
            iterate: x.clone(),
        });
        if dist_sq.sqrt() <= cfg.stop_tolerance {
            stop_reason = StopReason::WithinTolerance;
            break;
        }
    }

    Ok(Solution {
        policy: MixedPolicy { entries: active, aggregate: x },
        trace: SolveTrace {
            solver: SolverKind::ModifiedMnp,
            cycles,
            stop_reason,
            total_oracle_calls: calls,
        },
    })
}

/// Runs minor cycles until the active set is a corral with respect to `omega`,
/// then moves `x` to the affine minimizer. Returns the number of
/// point-removing minor cycles.
pub(crate) fn restore_corral(
    active: &mut Vec<PolicyEntry>,
    x: &mut MeasurementVec,
    omega: &MeasurementVec,
    corral_tol: f64,
    cycle: usize,
) -> Result<usize, SolveError> {
    let size_at_entry = active.len();
    let mut removals = 0;
    loop {
        let points: Vec<MeasurementVec> = active.iter().map(|e| e.measurement.clone()).collect();
        let solved = affine_minimizer(&points, omega)?;
        let mut alpha = solved.weights.clone();

        if alpha.iter().all(|&a| a > corral_tol) {
            let reduced = !solved.is_affinely_independent() && caratheodory_reduce(active, &mut alpha, &solved.null_directions);
            for (e, &a) in active.iter_mut().zip(&alpha) {
                e.weight = a;
            }
            *x = solved.minimizer;
            if reduced {
                continue;
            }
            return Ok(removals);
        }

        if removals >= size_at_entry {
            return Err(SolveError::MinorCycleOverrun { cycle, size: size_at_entry });
        }

        // Coefficients inside the tolerance band count as zero, which keeps
        // theta within [0, 1].
        for a in alpha.iter_mut() {
            if *a <= corral_tol {
                *a = a.min(0.0);
            }
        }
        let mut theta = f64::INFINITY;
        for (e, &a) in active.iter().zip(&alpha) {
            let gap = e.weight - a;
            if a <= 0.0 && gap > 0.0 {
                theta = theta.min(e.weight / gap);
            }
        }
        if !theta.is_finite() {
            return Err(SolveError::MinorCycleOverrun { cycle, size: size_at_entry });
        }

        *x = &solved.minimizer * theta + &*x * (1.0 - theta);
        for (e, &a) in active.iter_mut().zip(&alpha) {
            let gap = e.weight - a;
            let blocking = a <= 0.0 && gap > 0.0 && e.weight / gap == theta;
            e.weight = if blocking { 0.0 } else { theta * a + (1.0 - theta) * e.weight };
        }
        active.retain(|e| e.weight > 0.0);
        removals += 1;
    }
}

/// Shifts positive weights along an affine null direction until one of them
/// reaches zero and drops that entry. The represented point does not change.
/// Returns false when no direction allows a reduction.
fn caratheodory_reduce(active: &mut Vec<PolicyEntry>, alpha: &mut Vec<f64>, null_directions: &[Vec<f64>]) -> bool {
    for dir in null_directions {
        let sign = if dir.iter().any(|&d| d > 1e-12) { 1.0 } else { -1.0 };
        let mut step = f64::INFINITY;
        let mut hit = None;
        for (i, (&a, &d)) in alpha.iter().zip(dir).enumerate() {
            let d = sign * d;
            if d > 1e-12 && a / d < step {
                step = a / d;
                hit = Some(i);
            }
        }
        let Some(hit) = hit else { continue };
        for (a, &d) in alpha.iter_mut().zip(dir) {
            *a = (*a - step * sign * d).max(0.0);
        }
        alpha.remove(hit);
        active.remove(hit);
        return true;
    }
    false
}
