//! Linear-minimization oracles over policies.
//!
//! Given a direction `lambda`, an oracle returns a policy approximately
//! minimizing `lambda . J(pi)`, found by maximizing the scalar reward
//! `-lambda . c` with an RL method, together with the policy's measurement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::MeasurementVec;
use crate::mdp::{DeterministicPolicy, MdpError, VectorMdp};

/// Bellman residual at which value iteration stops.
pub const VI_RESIDUAL_TOL: f64 = 1e-12;
const VI_MAX_SWEEPS: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("direction has dimension {found}, environment has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("value iteration did not reach residual {VI_RESIDUAL_TOL} in {VI_MAX_SWEEPS} sweeps")]
    NoConvergence,
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exactness {
    Exact,
    Approximate,
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub policy: DeterministicPolicy,
    pub measurement: MeasurementVec,
    pub exactness: Exactness,
    /// Per-coordinate standard error of `measurement`; zero when exact.
    pub estimate_stderr: Vec<f64>,
}

/// A linear-minimization oracle over the measurement polytope.
pub trait RlOracle {
    fn measurement_dim(&self) -> usize;

    /// Whether results are exact minimizers with exact measurements.
    fn is_exact(&self) -> bool;

    fn query(&mut self, lambda: &MeasurementVec) -> Result<OracleResult, OracleError>;
}

impl<T: RlOracle + ?Sized> RlOracle for &mut T {
    fn measurement_dim(&self) -> usize {
        (**self).measurement_dim()
    }

    fn is_exact(&self) -> bool {
        (**self).is_exact()
    }

    fn query(&mut self, lambda: &MeasurementVec) -> Result<OracleResult, OracleError> {
        (**self).query(lambda)
    }
}

/// Scalar-reward view of a vector MDP with `r = -lambda . c`.
pub struct ScalarizedMdp<'a> {
    pub mdp: &'a VectorMdp,
    /// Expected reward per `(s, a)`, indexed `s * A + a`.
    rewards: Vec<f64>,
    /// Reward of each outcome, parallel to `mdp.outcomes(s, a)`.
    outcome_rewards: Vec<Vec<f64>>,
}

impl<'a> ScalarizedMdp<'a> {
    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state * self.mdp.num_actions() + action]
    }

    /// Exact expected discounted scalar return of `policy`.
    pub fn exact_return(&self, policy: &DeterministicPolicy) -> Result<f64, MdpError> {
        Ok(self.mdp.evaluate_signal(policy, &self.rewards, 1)?[0])
    }
}

pub fn scalarize<'a>(mdp: &'a VectorMdp, lambda: &MeasurementVec) -> Result<ScalarizedMdp<'a>, OracleError> {
    if lambda.len() != mdp.measurement_dim() {
        return Err(OracleError::DimensionMismatch {
            expected: mdp.measurement_dim(),
            found: lambda.len(),
        });
    }
    let dot = |c: &[f64]| -> f64 { -c.iter().zip(lambda.iter()).map(|(c, l)| c * l).sum::<f64>() };
    let mut rewards = Vec::with_capacity(mdp.num_states() * mdp.num_actions());
    let mut outcome_rewards = Vec::with_capacity(rewards.capacity());
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            rewards.push(dot(mdp.expected_measurement(s, a)));
            outcome_rewards.push(mdp.outcomes(s, a).iter().map(|o| dot(&o.measurement)).collect());
        }
    }
    Ok(ScalarizedMdp {
        mdp,
        rewards,
        outcome_rewards,
    })
}

/// Greedy action with ties broken by the lowest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Optimal deterministic policy for the scalarized reward: backward induction
/// over the horizon when one is set, value iteration otherwise.
pub fn solve_scalarized(view: &ScalarizedMdp<'_>) -> Result<DeterministicPolicy, OracleError> {
    let mdp = view.mdp;
    let (n, na) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.discount();
    let mut values = vec![0.0; n];
    let mut next_values = vec![0.0; n];
    let mut q = vec![0.0; na];
    let backup = |values: &[f64], s: usize, a: usize| -> f64 {
        let future: f64 = mdp
            .outcomes(s, a)
            .iter()
            .map(|o| if mdp.is_terminal(o.next) { 0.0 } else { o.prob * values[o.next] })
            .sum();
        view.reward(s, a) + gamma * future
    };
    // With a horizon H, the first decision sees H steps to go: Q_H is a backup
    // of V_{H-1}.
    let sweeps = mdp.horizon().map_or(VI_MAX_SWEEPS, |h| h - 1);
    let mut converged = false;
    for _ in 0..sweeps {
        let mut residual: f64 = 0.0;
        for s in 0..n {
            if mdp.is_terminal(s) {
                next_values[s] = 0.0;
                continue;
            }
            let best = (0..na)
                .map(|a| backup(&values, s, a))
                .fold(f64::NEG_INFINITY, f64::max);
            residual = residual.max((best - values[s]).abs());
            next_values[s] = best;
        }
        std::mem::swap(&mut values, &mut next_values);
        let done = match mdp.horizon() {
            // Finite horizon: stop early only once the stage values are stationary.
            Some(_) => residual == 0.0,
            None => residual <= VI_RESIDUAL_TOL,
        };
        if done {
            converged = true;
            break;
        }
    }
    if mdp.horizon().is_none() && !converged {
        return Err(OracleError::NoConvergence);
    }
    let mut policy = vec![0; n];
    for (s, slot) in policy.iter_mut().enumerate() {
        if mdp.is_terminal(s) {
            continue;
        }
        for (a, qa) in q.iter_mut().enumerate() {
            *qa = backup(&values, s, a);
        }
        *slot = argmax(&q);
    }
    Ok(DeterministicPolicy(policy))
}

/// Exact oracle: dynamic programming on the scalarized reward, exact
/// measurement of the returned policy.
#[derive(Clone, Debug)]
pub struct ValueIterationOracle {
    mdp: VectorMdp,
}

impl ValueIterationOracle {
    pub fn new(mdp: VectorMdp) -> Self {
        Self { mdp }
    }

    pub fn mdp(&self) -> &VectorMdp {
        &self.mdp
    }
}

pub fn vi_oracle(mdp: &VectorMdp, lambda: &MeasurementVec) -> Result<OracleResult, OracleError> {
    let view = scalarize(mdp, lambda)?;
    let policy = solve_scalarized(&view)?;
    let measurement = mdp.exact_measurement(&policy)?;
    Ok(OracleResult {
        policy,
        measurement,
        exactness: Exactness::Exact,
        estimate_stderr: vec![0.0; mdp.measurement_dim()],
    })
}

impl RlOracle for ValueIterationOracle {
    fn measurement_dim(&self) -> usize {
        self.mdp.measurement_dim()
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn query(&mut self, lambda: &MeasurementVec) -> Result<OracleResult, OracleError> {
        vi_oracle(&self.mdp, lambda)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QLearnConfig {
    pub episodes: usize,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_episodes: usize,
    pub eval_rollouts: usize,
    pub seed: u64,
}

impl Default for QLearnConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            learning_rate: 0.1,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_episodes: 1600,
            eval_rollouts: 1000,
            seed: 0,
        }
    }
}

impl QLearnConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(format!("learning_rate {} outside (0, 1]", self.learning_rate));
        }
        for (name, eps) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(format!("{name} {eps} outside [0, 1]"));
            }
        }
        if self.epsilon_end > self.epsilon_start {
            return Err("epsilon_end exceeds epsilon_start".into());
        }
        if self.eval_rollouts == 0 {
            return Err("eval_rollouts must be >= 1".into());
        }
        Ok(())
    }

    fn epsilon(&self, episode: usize) -> f64 {
        if self.epsilon_decay_episodes == 0 || episode >= self.epsilon_decay_episodes {
            return self.epsilon_end;
        }
        let frac = episode as f64 / self.epsilon_decay_episodes as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// Runs epsilon-greedy tabular Q-learning on the scalarized reward and
/// returns the greedy policy.
pub fn q_learning<R: Rng>(view: &ScalarizedMdp<'_>, cfg: &QLearnConfig, rng: &mut R) -> DeterministicPolicy {
    let mdp = view.mdp;
    let (n, na) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.discount();
    let cap = mdp.episode_cap();
    let mut table = vec![0.0; n * na];
    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon(episode);
        let mut state = mdp.sample_initial(rng);
        for _ in 0..cap {
            if mdp.is_terminal(state) {
                break;
            }
            let row = &table[state * na..(state + 1) * na];
            let action = if rng.gen::<f64>() < epsilon {
                rng.gen_range(0..na)
            } else {
                argmax(row)
            };
            let outcomes = mdp.outcomes(state, action);
            let idx = if outcomes.len() == 1 {
                0
            } else {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                outcomes
                    .iter()
                    .position(|o| {
                        acc += o.prob;
                        u < acc
                    })
                    .unwrap_or(outcomes.len() - 1)
            };
            let next = outcomes[idx].next;
            let reward = view.outcome_rewards[state * na + action][idx];
            let future = if mdp.is_terminal(next) {
                0.0
            } else {
                table[next * na..(next + 1) * na]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            let cell = &mut table[state * na + action];
            *cell += cfg.learning_rate * (reward + gamma * future - *cell);
            state = next;
        }
    }
    DeterministicPolicy(
        (0..n)
            .map(|s| if mdp.is_terminal(s) { 0 } else { argmax(&table[s * na..(s + 1) * na]) })
            .collect(),
    )
}

/// Monte Carlo estimate of `J(policy)`: mean and standard error per coordinate.
pub fn estimate_measurement<R: Rng>(
    mdp: &VectorMdp,
    policy: &DeterministicPolicy,
    rollouts: usize,
    rng: &mut R,
) -> (MeasurementVec, Vec<f64>) {
    let m = mdp.measurement_dim();
    let mut sum = MeasurementVec::zeros(m);
    let mut sum_sq = MeasurementVec::zeros(m);
    for _ in 0..rollouts {
        let x = mdp.rollout(policy, rng);
        sum_sq += x.component_mul(&x);
        sum += x;
    }
    let n = rollouts as f64;
    let mean = sum / n;
    let stderr = (0..m)
        .map(|k| {
            if rollouts < 2 {
                return 0.0;
            }
            let var = ((sum_sq[k] - n * mean[k] * mean[k]) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    (mean, stderr)
}

/// Approximate oracle backed by tabular Q-learning. Each call draws from its
/// own generator stream, so a run is reproducible from `cfg.seed`.
#[derive(Clone, Debug)]
pub struct QLearningOracle {
    mdp: VectorMdp,
    cfg: QLearnConfig,
    calls: u64,
}

impl QLearningOracle {
    pub fn new(mdp: VectorMdp, cfg: QLearnConfig) -> Self {
        Self { mdp, cfg, calls: 0 }
    }

    pub fn mdp(&self) -> &VectorMdp {
        &self.mdp
    }
}

pub fn qlearn_oracle(
    mdp: &VectorMdp,
    lambda: &MeasurementVec,
    cfg: &QLearnConfig,
) -> Result<OracleResult, OracleError> {
    qlearn_call(mdp, lambda, cfg, 0)
}

fn qlearn_call(
    mdp: &VectorMdp,
    lambda: &MeasurementVec,
    cfg: &QLearnConfig,
    call: u64,
) -> Result<OracleResult, OracleError> {
    let view = scalarize(mdp, lambda)?;
    let mut learn_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    learn_rng.set_stream(2 * call);
    let policy = q_learning(&view, cfg, &mut learn_rng);
    // Fresh rollouts, never the learning trajectories.
    let mut eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    eval_rng.set_stream(2 * call + 1);
    let (measurement, estimate_stderr) = estimate_measurement(mdp, &policy, cfg.eval_rollouts, &mut eval_rng);
    Ok(OracleResult {
        policy,
        measurement,
        exactness: Exactness::Approximate,
        estimate_stderr,
    })
}

impl RlOracle for QLearningOracle {
    fn measurement_dim(&self) -> usize {
        self.mdp.measurement_dim()
    }

    fn is_exact(&self) -> bool {
        false
    }

    fn query(&mut self, lambda: &MeasurementVec) -> Result<OracleResult, OracleError> {
        let result = qlearn_call(&self.mdp, lambda, &self.cfg, self.calls)?;
        self.calls += 1;
        Ok(result)
    }
}
