use std::time::Instant;

use super::{check_dims, CycleRecord, MixedPolicy, PolicyEntry, Solution, SolveConfig, SolveError, SolveTrace, SolverKind, StopReason};
use crate::geometry::{ConvexTarget, MeasurementVec};
use crate::oracle::RlOracle;

/// Vanilla conditional gradient with step size `2 / (t + 1)`. Every policy the
/// oracle returns is kept, so after `t` cycles the mix holds `t` entries.
pub fn solve_cg<O: RlOracle>(oracle: &mut O, target: &ConvexTarget, cfg: &SolveConfig) -> Result<Solution, SolveError> {
    let m = check_dims(oracle, target, cfg)?;
    let mut x = MeasurementVec::zeros(m);
    let mut entries: Vec<PolicyEntry> = Vec::new();
    let mut cycles = Vec::new();
    let mut stop_reason = StopReason::MaxCycles;

    for t in 1..=cfg.max_major_cycles {
        let started = Instant::now();
        let gradient = &x - target.project(&x)?;
        let found = oracle.query(&gradient)?;
        let eta = 2.0 / (t as f64 + 1.0);
        x = &x * (1.0 - eta) + &found.measurement * eta;
        for e in &mut entries {
            e.weight *= 1.0 - eta;
        }
        entries.push(PolicyEntry {
            policy: found.policy,
            weight: eta,
            measurement: found.measurement,
        });

        let dist_sq = target.squared_distance(&x)?;
        cycles.push(CycleRecord {
            t,
            oracle_calls: t,
            dist_sq,
            err: 0.5 * dist_sq,
            stored_policies: entries.len(),
            minor_cycles: 0,
            drop_step: false,
            wall_time: started.elapsed(),
            iterate: x.clone(),
        });
        if dist_sq.sqrt() <= cfg.stop_tolerance {
            stop_reason = StopReason::WithinTolerance;
            break;
        }
    }

    let total_oracle_calls = cycles.len();
    Ok(Solution {
        policy: MixedPolicy { entries, aggregate: x },
        trace: SolveTrace {
            solver: SolverKind::VanillaCg,
            cycles,
            stop_reason,
            total_oracle_calls,
        },
    })
}
