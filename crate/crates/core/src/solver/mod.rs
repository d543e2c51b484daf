//! Reduction solvers: vanilla conditional gradient and the modified
//! minimum-norm-point method, plus reward maximization by bisection.

mod bisect;
mod cg;
mod mnp;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ConvexTarget, GeometryError, MeasurementVec};
use crate::mdp::DeterministicPolicy;
use crate::oracle::{OracleError, RlOracle};

pub use bisect::maximize_reward_under_constraints;
pub use cg::solve_cg;
pub use mnp::{check_wolfe_criterion, solve_mnp};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("target has dimension {target}, environment measures {env}")]
    DimensionMismatch { target: usize, env: usize },
    #[error("minor cycles in major cycle {cycle} exceeded the active-set size {size}")]
    MinorCycleOverrun { cycle: usize, size: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("no feasible policy found at the lower threshold {lower}")]
    InfeasibleAtLower { lower: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    VanillaCg,
    ModifiedMnp,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::VanillaCg => "vanilla_cg",
            Self::ModifiedMnp => "modified_mnp",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub max_major_cycles: usize,
    /// Stop when `dist(x_t, target)` or the Wolfe gap falls to this value.
    pub stop_tolerance: f64,
    /// Affine coefficients must exceed this to count as strictly positive.
    pub corral_tolerance: f64,
    #[serde(rename = "kind")]
    pub solver_kind: SolverKind,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_major_cycles: 200,
            stop_tolerance: 1e-10,
            corral_tolerance: 1e-12,
            solver_kind: SolverKind::ModifiedMnp,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if self.max_major_cycles == 0 {
            return Err(SolveError::InvalidConfig("max_major_cycles must be >= 1".into()));
        }
        if !(self.stop_tolerance >= 0.0) {
            return Err(SolveError::InvalidConfig("stop_tolerance must be >= 0".into()));
        }
        if !(self.corral_tolerance >= 0.0) {
            return Err(SolveError::InvalidConfig("corral_tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PolicyEntry {
    pub policy: DeterministicPolicy,
    pub weight: f64,
    pub measurement: MeasurementVec,
}

/// A finite distribution over deterministic policies.
#[derive(Clone, Debug)]
pub struct MixedPolicy {
    pub entries: Vec<PolicyEntry>,
    /// The solver's iterate, equal to the weighted measurement sum.
    pub aggregate: MeasurementVec,
}

impl MixedPolicy {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    /// `sum_i w_i J_i`, recomputed from the entries.
    pub fn weighted_measurement(&self) -> MeasurementVec {
        let mut acc = MeasurementVec::zeros(self.aggregate.len());
        for e in &self.entries {
            acc.axpy(e.weight, &e.measurement, 1.0);
        }
        acc
    }

    /// `|aggregate - sum_i w_i J_i|`.
    pub fn representation_error(&self) -> f64 {
        (&self.aggregate - self.weighted_measurement()).norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxCycles,
    WithinTolerance,
    WolfeCriterion,
}

/// One major cycle.
#[derive(Clone, Debug)]
pub struct CycleRecord {
    pub t: usize,
    pub oracle_calls: usize,
    pub dist_sq: f64,
    /// `dist_sq / 2`: the approximation error when the problem is feasible.
    pub err: f64,
    pub stored_policies: usize,
    /// Point-removing minor cycles run in this major cycle.
    pub minor_cycles: usize,
    pub drop_step: bool,
    pub wall_time: Duration,
    pub iterate: MeasurementVec,
}

#[derive(Clone, Debug)]
pub struct SolveTrace {
    pub solver: SolverKind,
    pub cycles: Vec<CycleRecord>,
    pub stop_reason: StopReason,
    /// Includes the final oracle call when the Wolfe criterion stops a run.
    pub total_oracle_calls: usize,
}

impl SolveTrace {
    pub fn final_dist_sq(&self) -> Option<f64> {
        self.cycles.last().map(|c| c.dist_sq)
    }

    /// Running count of drop steps after each cycle.
    pub fn cumulative_drop_steps(&self) -> Vec<usize> {
        self.cycles
            .iter()
            .scan(0, |acc, c| {
                *acc += usize::from(c.drop_step);
                Some(*acc)
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub policy: MixedPolicy,
    pub trace: SolveTrace,
}

impl Solution {
    /// Whether the final mix is certified to lie within `eps` of the target.
    /// A stop by Wolfe's criterion with gap at most `eps` bounds `dist^2` by
    /// `eps` on a feasible problem, so that case is judged on `dist^2`.
    pub fn reaches_target(&self, target: &ConvexTarget, eps: f64) -> Result<bool, SolveError> {
        let dist_sq = target.squared_distance(&self.policy.aggregate)?;
        Ok(match self.trace.stop_reason {
            StopReason::WolfeCriterion => dist_sq <= eps,
            _ => dist_sq.sqrt() <= eps,
        })
    }
}

/// Dispatches on `cfg.solver_kind`.
pub fn solve<O: RlOracle>(oracle: &mut O, target: &ConvexTarget, cfg: &SolveConfig) -> Result<Solution, SolveError> {
    match cfg.solver_kind {
        SolverKind::VanillaCg => solve_cg(oracle, target, cfg),
        SolverKind::ModifiedMnp => solve_mnp(oracle, target, cfg),
    }
}

fn check_dims<O: RlOracle>(oracle: &O, target: &ConvexTarget, cfg: &SolveConfig) -> Result<usize, SolveError> {
    cfg.validate()?;
    let env = oracle.measurement_dim();
    let target_dim = target.validate("target")?;
    if target_dim != env {
        return Err(SolveError::DimensionMismatch { target: target_dim, env });
    }
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{make_gridworld, make_rps, make_worstcase, DEFAULT_GRID_HORIZON, DEFAULT_MAP};
    use crate::oracle::ValueIterationOracle;

    fn v(xs: &[f64]) -> MeasurementVec {
        MeasurementVec::from_row_slice(xs)
    }

    fn cfg(kind: SolverKind, t: usize, eps: f64) -> SolveConfig {
        SolveConfig {
            max_major_cycles: t,
            stop_tolerance: eps,
            solver_kind: kind,
            ..SolveConfig::default()
        }
    }

    #[test]
    fn wolfe_examples() {
        let z = v(&[0.0, 0.0]);
        assert!(check_wolfe_criterion(&v(&[1.0, 1.0]), &v(&[1.0, 1.0]), &v(&[7.0, -3.0]), 0.0));
        assert!(!check_wolfe_criterion(&v(&[2.0, 0.0]), &z, &v(&[1.0, 0.0]), 0.0));
        assert!(check_wolfe_criterion(&v(&[2.0, 0.0]), &z, &v(&[3.0, 0.0]), 0.0));
    }

    #[test]
    fn mnp_worstcase_uses_every_vertex() {
        let mut oracle = ValueIterationOracle::new(make_worstcase(2).unwrap());
        let target = ConvexTarget::Singleton(vec![0.25, 0.25]);
        let sol = solve_mnp(&mut oracle, &target, &cfg(SolverKind::ModifiedMnp, 50, 1e-10)).unwrap();
        assert!(target.distance(&sol.policy.aggregate).unwrap() <= 1e-8);
        assert_eq!(sol.policy.len(), 3);
        let mut weights: Vec<(usize, f64)> = sol.policy.entries.iter().map(|e| (e.policy.action(0), e.weight)).collect();
        weights.sort_by_key(|w| w.0);
        for ((_, w), expected) in weights.iter().zip([0.25, 0.25, 0.5]) {
            assert!((w - expected).abs() < 1e-9);
        }
        assert!(sol.policy.representation_error() < 1e-12);
    }

    #[test]
    fn first_major_cycle_lands_on_the_oracle_point() {
        for kind in [SolverKind::VanillaCg, SolverKind::ModifiedMnp] {
            let mut oracle = ValueIterationOracle::new(make_worstcase(3).unwrap());
            let target = ConvexTarget::Singleton(vec![0.2, 0.2, 0.2]);
            let sol = solve(&mut oracle, &target, &cfg(kind, 1, 0.0)).unwrap();
            let first = &sol.trace.cycles[0];
            assert_eq!(first.minor_cycles, 0);
            assert_eq!(first.stored_policies, 1);
            assert_eq!(sol.policy.aggregate, sol.policy.entries[0].measurement);
        }
    }

    #[test]
    fn cg_keeps_every_policy_and_meets_the_rate() {
        let mut oracle = ValueIterationOracle::new(make_worstcase(2).unwrap());
        let target = ConvexTarget::Singleton(vec![0.25, 0.25]);
        let sol = solve_cg(&mut oracle, &target, &cfg(SolverKind::VanillaCg, 200, 0.0)).unwrap();
        assert_eq!(sol.trace.cycles.len(), 200);
        assert_eq!(sol.policy.len(), 200);
        for c in &sol.trace.cycles {
            assert_eq!(c.stored_policies, c.t);
            assert!(c.dist_sq <= 16.0 / (c.t as f64 + 2.0));
        }
        assert!((sol.policy.weight_sum() - 1.0).abs() < 1e-9);
        assert!(sol.policy.representation_error() < 1e-9);
    }

    #[test]
    fn mnp_navigation_box_mixes_two_routes() {
        let grid = make_gridworld(DEFAULT_MAP, 1.0, DEFAULT_GRID_HORIZON).unwrap();
        let mut oracle = ValueIterationOracle::new(grid.mdp);
        let target = ConvexTarget::Box { lower: vec![0.0, 0.0], upper: vec![11.0, 0.5] };
        let sol = solve_mnp(&mut oracle, &target, &cfg(SolverKind::ModifiedMnp, 100, 1e-10)).unwrap();
        assert!(sol.policy.len() <= 3);
        assert!(target.squared_distance(&sol.policy.aggregate).unwrap() <= 1e-6);
        assert!(sol.trace.cycles.iter().all(|c| c.stored_policies <= 3));
    }

    #[test]
    fn mnp_on_rps_stays_small() {
        let mut oracle = ValueIterationOracle::new(make_rps(1).unwrap());
        let target = ConvexTarget::Box { lower: vec![1.0 / 9.0; 3], upper: vec![1.0 / 3.0; 3] };
        let sol = solve_mnp(&mut oracle, &target, &cfg(SolverKind::ModifiedMnp, 100, 1e-10)).unwrap();
        assert!(sol.trace.cycles.iter().all(|c| c.stored_policies <= 4));
        assert!(sol.trace.final_dist_sq().unwrap() <= 1e-6);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut oracle = ValueIterationOracle::new(make_worstcase(2).unwrap());
        let target = ConvexTarget::Singleton(vec![0.1, 0.1, 0.1]);
        let err = solve_mnp(&mut oracle, &target, &SolveConfig::default()).unwrap_err();
        assert!(matches!(err, SolveError::DimensionMismatch { target: 3, env: 2 }));
    }

    #[test]
    fn zero_cycles_is_invalid() {
        let mut oracle = ValueIterationOracle::new(make_worstcase(2).unwrap());
        let target = ConvexTarget::Singleton(vec![0.1, 0.1]);
        let err = solve_cg(&mut oracle, &target, &cfg(SolverKind::VanillaCg, 0, 0.0)).unwrap_err();
        assert!(matches!(err, SolveError::InvalidConfig(_)));
    }

    #[test]
    fn bisection_finds_the_top_of_the_box() {
        let mut oracle = ValueIterationOracle::new(make_worstcase(2).unwrap());
        let base = ConvexTarget::Box { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] };
        let (policy, r) =
            maximize_reward_under_constraints(&mut oracle, 0, &base, (0.0, 1.0), 1e-6, &cfg(SolverKind::ModifiedMnp, 100, 1e-8)).unwrap();
        assert!((r - 1.0).abs() <= 1e-6);
        assert_eq!(policy.len(), 1);
        assert_eq!(policy.entries[0].policy.action(0), 0);
    }

    #[test]
    fn bisection_reports_infeasible_lower_bound() {
        let mut oracle = ValueIterationOracle::new(make_worstcase(2).unwrap());
        let base = ConvexTarget::Singleton(vec![5.0, 5.0]);
        let err =
            maximize_reward_under_constraints(&mut oracle, 0, &base, (0.0, 1.0), 1e-3, &cfg(SolverKind::ModifiedMnp, 100, 1e-8)).unwrap_err();
        assert!(matches!(err, SolveError::InfeasibleAtLower { .. }));
    }

    #[test]
    fn bisection_interior_threshold() {
        // J1 >= 0.5 on the simplex leaves at most 0.5 for J0.
        let mut oracle = ValueIterationOracle::new(make_worstcase(2).unwrap());
        let base = ConvexTarget::Box { lower: vec![0.0, 0.5], upper: vec![1.0, 1.0] };
        let (policy, r) =
            maximize_reward_under_constraints(&mut oracle, 0, &base, (0.0, 1.0), 1e-6, &cfg(SolverKind::ModifiedMnp, 200, 1e-10)).unwrap();
        assert!((r - 0.5).abs() <= 1e-4, "threshold {r}");
        assert!(policy.aggregate[0] >= r - 1e-4);
        assert!(policy.aggregate[1] >= 0.5 - 1e-4);
    }
}
