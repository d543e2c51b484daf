use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::output::{write_trace_csv, PairedRow, TraceRow};
use super::{ExperimentConfig, HarnessError, OracleSpec};
use crate::geometry::MeasurementVec;
use crate::mdp::{DeterministicPolicy, VectorMdp};
use crate::oracle::{OracleError, OracleResult, QLearnConfig, QLearningOracle, RlOracle, ValueIterationOracle};
use crate::solver::{solve, Solution, SolverKind, StopReason};

/// The oracle selected by a config.
pub enum AnyOracle {
    ValueIteration(ValueIterationOracle),
    QLearning(QLearningOracle),
}

impl AnyOracle {
    pub fn build(spec: &OracleSpec, mdp: VectorMdp, run_seed: u64) -> Self {
        match spec {
            OracleSpec::ValueIteration => Self::ValueIteration(ValueIterationOracle::new(mdp)),
            OracleSpec::QLearning(q) => Self::QLearning(QLearningOracle::new(
                mdp,
                QLearnConfig {
                    seed: q.seed ^ run_seed,
                    ..q.clone()
                },
            )),
        }
    }
}

impl RlOracle for AnyOracle {
    fn measurement_dim(&self) -> usize {
        match self {
            Self::ValueIteration(o) => o.measurement_dim(),
            Self::QLearning(o) => o.measurement_dim(),
        }
    }

    fn is_exact(&self) -> bool {
        match self {
            Self::ValueIteration(o) => o.is_exact(),
            Self::QLearning(o) => o.is_exact(),
        }
    }

    fn query(&mut self, lambda: &MeasurementVec) -> Result<OracleResult, OracleError> {
        match self {
            Self::ValueIteration(o) => o.query(lambda),
            Self::QLearning(o) => o.query(lambda),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 { sorted[mid] } else { 0.5 * (sorted[mid - 1] + sorted[mid]) };
        Self {
            mean,
            std: var.sqrt(),
            median,
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MixEntry {
    pub policy: String,
    pub weight: f64,
    pub measurement: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub run_id: usize,
    pub seed: u64,
    pub major_cycles: usize,
    pub total_oracle_calls: usize,
    pub stop_reason: StopReason,
    pub final_dist_sq: f64,
    pub final_err: f64,
    pub final_stored_policies: usize,
    pub reached_target: bool,
    pub mixture: Vec<MixEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub solver: SolverKind,
    pub environment: String,
    pub num_states: usize,
    pub num_actions: usize,
    pub measurement_dim: usize,
    pub seed: u64,
    pub repeats: usize,
    pub final_dist_sq: Stats,
    pub final_stored_policies: Stats,
    pub all_reached_target: bool,
    pub runs: Vec<RunSummary>,
    #[serde(skip)]
    pub rows: Vec<TraceRow>,
    #[serde(skip)]
    pub solutions: Vec<Solution>,
}

fn summarize(run_id: usize, seed: u64, sol: &Solution, reached_target: bool) -> RunSummary {
    let last = sol.trace.cycles.last().expect("a solve runs at least one cycle");
    RunSummary {
        run_id,
        seed,
        major_cycles: sol.trace.cycles.len(),
        total_oracle_calls: sol.trace.total_oracle_calls,
        stop_reason: sol.trace.stop_reason,
        final_dist_sq: last.dist_sq,
        final_err: last.err,
        final_stored_policies: sol.policy.len(),
        reached_target,
        mixture: sol
            .policy
            .entries
            .iter()
            .map(|e| MixEntry {
                policy: e.policy.label(),
                weight: e.weight,
                measurement: e.measurement.as_slice().to_vec(),
            })
            .collect(),
    }
}

fn execute(cfg: &ExperimentConfig, mdp: &VectorMdp, kind: SolverKind) -> Result<ExperimentReport, HarnessError> {
    let solve_cfg = crate::solver::SolveConfig { solver_kind: kind, ..cfg.solver.clone() };
    let outcomes: Vec<(Solution, bool)> = (0..cfg.repeats)
        .into_par_iter()
        .map(|run| {
            let mut oracle = AnyOracle::build(&cfg.oracle, mdp.clone(), cfg.run_seed(run));
            let sol = solve(&mut oracle, &cfg.target, &solve_cfg)?;
            let reached = sol.reaches_target(&cfg.target, solve_cfg.stop_tolerance)?;
            Ok((sol, reached))
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for (run, (sol, reached)) in outcomes.iter().enumerate() {
        rows.extend(sol.trace.cycles.iter().map(|c| TraceRow::from_cycle(run, c, cfg.record_timing)));
        runs.push(summarize(run, cfg.run_seed(run), sol, *reached));
    }
    let dists: Vec<f64> = runs.iter().map(|r| r.final_dist_sq).collect();
    let counts: Vec<f64> = runs.iter().map(|r| r.final_stored_policies as f64).collect();
    Ok(ExperimentReport {
        solver: kind,
        environment: cfg.environment.kind().to_string(),
        num_states: mdp.num_states(),
        num_actions: mdp.num_actions(),
        measurement_dim: mdp.measurement_dim(),
        seed: cfg.seed,
        repeats: cfg.repeats,
        final_dist_sq: Stats::of(&dists),
        final_stored_policies: Stats::of(&counts),
        all_reached_target: runs.iter().all(|r| r.reached_target),
        runs,
        rows,
        solutions: outcomes.into_iter().map(|(s, _)| s).collect(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    let io = |source| HarnessError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    File::create(path).map(BufWriter::new).map_err(io)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

/// Runs `cfg.repeats` seeded solves with the configured solver, writes the
/// trace CSV to `cfg.output` and the JSON summary beside it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let mdp = cfg.validate()?;
    let report = execute(cfg, &mdp, cfg.solver.solver_kind)?;
    write_trace_csv(create(&cfg.output)?, &report.rows)?;
    write_json(&cfg.summary_path(), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub vanilla_cg: ExperimentReport,
    pub modified_mnp: ExperimentReport,
    #[serde(skip)]
    pub rows: Vec<PairedRow>,
}

fn pair_rows(cg: &ExperimentReport, mnp: &ExperimentReport) -> Vec<PairedRow> {
    let mut rows = Vec::new();
    for (run, (a, b)) in cg.solutions.iter().zip(&mnp.solutions).enumerate() {
        let len = a.trace.cycles.len().max(b.trace.cycles.len());
        for i in 0..len {
            let (ca, cb) = (a.trace.cycles.get(i), b.trace.cycles.get(i));
            rows.push(PairedRow {
                run_id: run,
                t: i + 1,
                cg_dist_sq: ca.map(|c| c.dist_sq),
                cg_err: ca.map(|c| c.err),
                cg_stored_policies: ca.map(|c| c.stored_policies),
                mnp_dist_sq: cb.map(|c| c.dist_sq),
                mnp_err: cb.map(|c| c.err),
                mnp_stored_policies: cb.map(|c| c.stored_policies),
                mnp_minor_cycles: cb.map(|c| c.minor_cycles),
                mnp_drop_step: cb.map(|c| c.drop_step),
            });
        }
    }
    rows
}

/// Runs both solvers with identical environments and oracle seeds and writes
/// the per-t paired CSV to `cfg.output` with both summaries beside it.
pub fn compare_solvers(cfg: &ExperimentConfig) -> Result<ComparisonReport, HarnessError> {
    let mdp = cfg.validate()?;
    let vanilla_cg = execute(cfg, &mdp, SolverKind::VanillaCg)?;
    let modified_mnp = execute(cfg, &mdp, SolverKind::ModifiedMnp)?;
    let rows = pair_rows(&vanilla_cg, &modified_mnp);
    let report = ComparisonReport { vanilla_cg, modified_mnp, rows };
    write_trace_csv(create(&cfg.output)?, &report.rows)?;
    write_json(&cfg.summary_path(), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub environment: String,
    pub map_path: Option<PathBuf>,
    pub num_states: usize,
    pub num_actions: usize,
    pub measurement_dim: usize,
    pub deterministic_policies: Option<u64>,
    pub solver: SolverKind,
    pub repeats: usize,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "valid: environment={}", self.environment)?;
        if let Some(p) = &self.map_path {
            write!(f, " map={}", p.display())?;
        }
        write!(f, " states={} actions={} m={}", self.num_states, self.num_actions, self.measurement_dim)?;
        match self.deterministic_policies {
            Some(n) => write!(f, " policies={n}")?,
            None => write!(f, " policies>2^64")?,
        }
        write!(f, " solver={} repeats={}", self.solver.name(), self.repeats)
    }
}

pub fn validate_config(path: &Path) -> Result<ValidationReport, HarnessError> {
    let cfg = ExperimentConfig::load(path)?;
    let mdp = cfg.validate()?;
    Ok(ValidationReport {
        environment: cfg.environment.kind().to_string(),
        map_path: cfg.resolve_map()?,
        num_states: mdp.num_states(),
        num_actions: mdp.num_actions(),
        measurement_dim: mdp.measurement_dim(),
        deterministic_policies: mdp.policy_count(),
        solver: cfg.solver.solver_kind,
        repeats: cfg.repeats,
    })
}

/// Exact measurement of every deterministic policy, in enumeration order.
pub fn enumerate_measurements(mdp: &VectorMdp, limit: u64) -> Result<Vec<(DeterministicPolicy, MeasurementVec)>, HarnessError> {
    match mdp.policy_count() {
        Some(n) if n <= limit => {}
        count => {
            return Err(HarnessError::TooManyPolicies {
                count: count.map_or_else(|| "more than 2^64".to_string(), |n| n.to_string()),
                limit,
            })
        }
    }
    mdp.enumerate_policies()
        .map(|p| {
            let j = mdp.exact_measurement(&p)?;
            Ok((p, j))
        })
        .collect()
}
