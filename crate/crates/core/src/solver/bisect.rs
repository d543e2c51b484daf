use super::{solve, MixedPolicy, SolveConfig, SolveError};
use crate::geometry::ConvexTarget;
use crate::oracle::RlOracle;

/// Largest `r` in `range` (to within `bisect_tol`) such that the target
/// intersected with `J[reward_dim] >= r` admits a mixed policy within
/// `cfg.stop_tolerance`. Returns that policy and `r`.
/// Probes are judged by [`super::Solution::reaches_target`].
pub fn maximize_reward_under_constraints<O: RlOracle>(
    oracle: &mut O,
    reward_dim: usize,
    base_target: &ConvexTarget,
    range: (f64, f64),
    bisect_tol: f64,
    cfg: &SolveConfig,
) -> Result<(MixedPolicy, f64), SolveError> {
    let m = oracle.measurement_dim();
    let (lo, hi) = range;
    if reward_dim >= m {
        return Err(SolveError::InvalidConfig(format!("reward_dim {reward_dim} must be below {m}")));
    }
    if !(lo <= hi) {
        return Err(SolveError::InvalidConfig(format!("search range [{lo}, {hi}] is empty")));
    }
    if !(bisect_tol > 0.0) {
        return Err(SolveError::InvalidConfig("bisect_tol must be > 0".into()));
    }

    let mut probe = |r: f64| -> Result<Option<MixedPolicy>, SolveError> {
        let mut normal = vec![0.0; m];
        normal[reward_dim] = -1.0;
        let target = ConvexTarget::Intersection(vec![base_target.clone(), ConvexTarget::Halfspace { normal, offset: -r }]);
        if target.validate("target").is_err() {
            return Ok(None);
        }
        let solved = solve(&mut *oracle, &target, cfg)?;
        Ok(solved.reaches_target(&target, cfg.stop_tolerance)?.then_some(solved.policy))
    };

    let Some(mut best) = probe(lo)? else {
        return Err(SolveError::InfeasibleAtLower { lower: lo });
    };
    if let Some(policy) = probe(hi)? {
        return Ok((policy, hi));
    }
    let (mut feasible, mut infeasible) = (lo, hi);
    while infeasible - feasible > bisect_tol {
        let mid = 0.5 * (feasible + infeasible);
        match probe(mid)? {
            Some(policy) => {
                best = policy;
                feasible = mid;
            }
            None => infeasible = mid,
        }
    }
    Ok((best, feasible))
}
