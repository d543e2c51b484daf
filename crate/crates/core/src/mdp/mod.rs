//! Vector-valued MDPs: exact long-term measurements, episode simulation, and
//! the built-in environments.
//!
//! Each `(state, action)` pair owns a list of outcomes `(next, prob,
//! measurement)`. The measurement attached to an outcome is what the agent
//! observes on that step; exact computations use its expectation `c(s, a)`.
//! Terminal states absorb and emit nothing.

mod envs;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::MeasurementVec;

pub use envs::{
    make_bandit, make_gridworld, make_random_mdp, make_rps, make_worstcase, GridAction, GridWorld,
    DEFAULT_GRID_HORIZON, DEFAULT_MAP,
};

/// Probability rows must sum to one within this tolerance.
pub const PROB_TOL: f64 = 1e-12;

/// Step cap used by simulation when the MDP has no horizon and `gamma == 1`.
const UNBOUNDED_EPISODE_GUARD: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("invalid MDP: {0}")]
    Invalid(String),
    #[error("policy covers {found} states, MDP has {expected}")]
    PolicySize { expected: usize, found: usize },
    #[error("policy picks action {action} in state {state}, only {num_actions} actions exist")]
    PolicyAction {
        state: usize,
        action: usize,
        num_actions: usize,
    },
    #[error("measurement diverges: state {state} cannot reach a terminal state under this policy and gamma = 1")]
    Divergent { state: usize },
    #[error("malformed grid map: {0}")]
    Map(String),
}

/// One possible result of taking an action.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub measurement: Vec<f64>,
}

/// Raw tables for [`VectorMdp::new`]. `outcomes[s * num_actions + a]`.
#[derive(Clone, Debug)]
pub struct MdpTables {
    pub num_states: usize,
    pub num_actions: usize,
    pub measurement_dim: usize,
    pub outcomes: Vec<Vec<Outcome>>,
    pub initial: Vec<f64>,
    pub discount: f64,
    /// Episode truncation; `None` means unbounded.
    pub horizon: Option<usize>,
    pub terminal: Vec<bool>,
}

/// An immutable, validated vector-valued MDP.
#[derive(Clone, Debug)]
pub struct VectorMdp {
    tables: MdpTables,
    /// `c(s, a)` flattened as `[(s * A + a) * m + k]`.
    expected: Vec<f64>,
}

/// A stationary deterministic policy: one action per state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DeterministicPolicy(pub Vec<usize>);

impl DeterministicPolicy {
    pub fn constant(num_states: usize, action: usize) -> Self {
        Self(vec![action; num_states])
    }

    pub fn action(&self, state: usize) -> usize {
        self.0[state]
    }

    /// Compact text form, e.g. `0.3.1`.
    pub fn label(&self) -> String {
        self.0
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(".")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub measurement: MeasurementVec,
}

#[derive(Clone, Debug)]
pub struct EpisodeTrace {
    pub steps: Vec<Step>,
    pub discounted_sum: MeasurementVec,
}

impl VectorMdp {
    pub fn new(tables: MdpTables) -> Result<Self, MdpError> {
        let t = &tables;
        let invalid = |s: String| Err(MdpError::Invalid(s));
        if t.num_states == 0 || t.num_actions == 0 || t.measurement_dim == 0 {
            return invalid("states, actions and measurement dimension must be >= 1".into());
        }
        if t.outcomes.len() != t.num_states * t.num_actions {
            return invalid(format!(
                "expected {} outcome lists, got {}",
                t.num_states * t.num_actions,
                t.outcomes.len()
            ));
        }
        if t.initial.len() != t.num_states || t.terminal.len() != t.num_states {
            return invalid("initial distribution and terminal mask must cover every state".into());
        }
        if !(0.0..=1.0).contains(&t.discount) {
            return invalid(format!("discount {} outside [0, 1]", t.discount));
        }
        if t.horizon == Some(0) {
            return invalid("horizon must be >= 1".into());
        }
        if t.initial.iter().any(|&p| !(p >= 0.0)) {
            return invalid("initial distribution has negative entries".into());
        }
        let total: f64 = t.initial.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return invalid(format!("initial distribution sums to {total}"));
        }
        let m = t.measurement_dim;
        let mut expected = vec![0.0; t.outcomes.len() * m];
        for (sa, row) in t.outcomes.iter().enumerate() {
            let (s, a) = (sa / t.num_actions, sa % t.num_actions);
            if row.is_empty() {
                return invalid(format!("state {s} action {a} has no outcomes"));
            }
            let mut total = 0.0;
            for o in row {
                if o.next >= t.num_states {
                    return invalid(format!("state {s} action {a} leads to unknown state {}", o.next));
                }
                if !(o.prob >= 0.0) {
                    return invalid(format!("state {s} action {a} has a negative probability"));
                }
                if o.measurement.len() != m || o.measurement.iter().any(|c| !c.is_finite()) {
                    return invalid(format!(
                        "state {s} action {a} has a malformed measurement (need {m} finite entries)"
                    ));
                }
                total += o.prob;
                for k in 0..m {
                    expected[sa * m + k] += o.prob * o.measurement[k];
                }
            }
            if (total - 1.0).abs() > PROB_TOL {
                return invalid(format!("state {s} action {a} probabilities sum to {total}"));
            }
        }
        Ok(Self { tables, expected })
    }

    pub fn num_states(&self) -> usize {
        self.tables.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.tables.num_actions
    }

    pub fn measurement_dim(&self) -> usize {
        self.tables.measurement_dim
    }

    pub fn discount(&self) -> f64 {
        self.tables.discount
    }

    pub fn horizon(&self) -> Option<usize> {
        self.tables.horizon
    }

    pub fn initial(&self) -> &[f64] {
        &self.tables.initial
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.tables.terminal[state]
    }

    pub fn outcomes(&self, state: usize, action: usize) -> &[Outcome] {
        &self.tables.outcomes[state * self.tables.num_actions + action]
    }

    /// Expected one-step measurement `c(s, a)`.
    pub fn expected_measurement(&self, state: usize, action: usize) -> &[f64] {
        let m = self.tables.measurement_dim;
        let sa = state * self.tables.num_actions + action;
        &self.expected[sa * m..(sa + 1) * m]
    }

    pub fn check_policy(&self, policy: &DeterministicPolicy) -> Result<(), MdpError> {
        if policy.0.len() != self.num_states() {
            return Err(MdpError::PolicySize {
                expected: self.num_states(),
                found: policy.0.len(),
            });
        }
        if let Some((state, &action)) = policy
            .0
            .iter()
            .enumerate()
            .find(|(_, &a)| a >= self.num_actions())
        {
            return Err(MdpError::PolicyAction {
                state,
                action,
                num_actions: self.num_actions(),
            });
        }
        Ok(())
    }

    /// Number of stationary deterministic policies that differ on some
    /// non-terminal state, if it fits in a `u64`.
    pub fn policy_count(&self) -> Option<u64> {
        let free = (0..self.num_states()).filter(|&s| !self.is_terminal(s)).count();
        (self.num_actions() as u64).checked_pow(free as u32)
    }

    /// Every deterministic policy, varying actions on non-terminal states only
    /// (terminal states keep action 0). Lexicographic with the lowest state
    /// index varying fastest.
    pub fn enumerate_policies(&self) -> PolicyEnumerator {
        let free: Vec<usize> = (0..self.num_states()).filter(|&s| !self.is_terminal(s)).collect();
        PolicyEnumerator {
            current: Some(vec![0; self.num_states()]),
            free,
            num_actions: self.num_actions(),
        }
    }

    /// Exact expected discounted sum of a per-`(s, a)` signal of `width`
    /// columns (`signal[(s * A + a) * width + k]`) under `policy`.
    pub fn evaluate_signal(
        &self,
        policy: &DeterministicPolicy,
        signal: &[f64],
        width: usize,
    ) -> Result<Vec<f64>, MdpError> {
        self.check_policy(policy)?;
        let n = self.num_states();
        let a_count = self.num_actions();
        let gamma = self.discount();
        let row = |s: usize| {
            let sa = s * a_count + policy.action(s);
            &signal[sa * width..(sa + 1) * width]
        };
        let mut total = vec![0.0; width];
        match self.horizon() {
            Some(h) => {
                let mut dist = self.tables.initial.clone();
                let mut next = vec![0.0; n];
                let mut weight = 1.0;
                for _ in 0..h {
                    next.iter_mut().for_each(|x| *x = 0.0);
                    let mut live = false;
                    for s in 0..n {
                        let p = dist[s];
                        if p == 0.0 || self.is_terminal(s) {
                            continue;
                        }
                        live = true;
                        for (acc, c) in total.iter_mut().zip(row(s)) {
                            *acc += weight * p * c;
                        }
                        for o in self.outcomes(s, policy.action(s)) {
                            next[o.next] += p * o.prob;
                        }
                    }
                    if !live {
                        break;
                    }
                    std::mem::swap(&mut dist, &mut next);
                    weight *= gamma;
                }
            }
            None => {
                if gamma >= 1.0 {
                    self.check_absorbing(policy)?;
                }
                // Occupancy d solves (I - gamma P_pi^T) d = beta over live states.
                let mut system = DMatrix::<f64>::identity(n, n);
                for s in 0..n {
                    if self.is_terminal(s) {
                        continue;
                    }
                    for o in self.outcomes(s, policy.action(s)) {
                        if !self.is_terminal(o.next) {
                            system[(o.next, s)] -= gamma * o.prob;
                        }
                    }
                }
                let beta = DVector::from_column_slice(&self.tables.initial);
                let occupancy = system.lu().solve(&beta).ok_or(MdpError::Divergent { state: 0 })?;
                for s in 0..n {
                    if self.is_terminal(s) {
                        continue;
                    }
                    for (acc, c) in total.iter_mut().zip(row(s)) {
                        *acc += occupancy[s] * c;
                    }
                }
            }
        }
        Ok(total)
    }

    /// Long-term measurement `J(policy)`, computed exactly.
    pub fn exact_measurement(&self, policy: &DeterministicPolicy) -> Result<MeasurementVec, MdpError> {
        let m = self.measurement_dim();
        let j = self.evaluate_signal(policy, &self.expected, m)?;
        Ok(MeasurementVec::from_vec(j))
    }

    /// With `gamma = 1` and no horizon, every state reachable from the initial
    /// distribution must be able to reach a terminal state.
    fn check_absorbing(&self, policy: &DeterministicPolicy) -> Result<(), MdpError> {
        let n = self.num_states();
        let mut reaches_terminal: Vec<bool> = (0..n).map(|s| self.is_terminal(s)).collect();
        loop {
            let mut changed = false;
            for s in 0..n {
                if reaches_terminal[s] {
                    continue;
                }
                if self
                    .outcomes(s, policy.action(s))
                    .iter()
                    .any(|o| o.prob > 0.0 && reaches_terminal[o.next])
                {
                    reaches_terminal[s] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&s| self.tables.initial[s] > 0.0).collect();
        while let Some(s) = stack.pop() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            if !reaches_terminal[s] {
                return Err(MdpError::Divergent { state: s });
            }
            if self.is_terminal(s) {
                continue;
            }
            for o in self.outcomes(s, policy.action(s)) {
                if o.prob > 0.0 && !seen[o.next] {
                    stack.push(o.next);
                }
            }
        }
        Ok(())
    }

    fn sample_index<R: Rng>(rng: &mut R, probs: impl Iterator<Item = f64>) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, p) in probs.enumerate() {
            if p > 0.0 {
                last = i;
            }
            acc += p;
            if u < acc {
                return i;
            }
        }
        last
    }

    pub(crate) fn sample_initial<R: Rng>(&self, rng: &mut R) -> usize {
        Self::sample_index(rng, self.tables.initial.iter().copied())
    }

    pub(crate) fn sample_outcome<R: Rng>(&self, rng: &mut R, state: usize, action: usize) -> &Outcome {
        let outcomes = self.outcomes(state, action);
        if outcomes.len() == 1 {
            return &outcomes[0];
        }
        &outcomes[Self::sample_index(rng, outcomes.iter().map(|o| o.prob))]
    }

    /// Maximum number of steps a simulated episode may take.
    pub fn episode_cap(&self) -> usize {
        match self.horizon() {
            Some(h) => h,
            None if self.discount() < 1.0 && self.discount() > 0.0 => {
                // Beyond this point gamma^t < 1e-17 and the tail is negligible.
                ((1e-17f64).ln() / self.discount().ln()).ceil() as usize + 1
            }
            None if self.discount() == 0.0 => 1,
            None => UNBOUNDED_EPISODE_GUARD,
        }
    }

    /// Runs one episode and returns only its discounted measurement sum.
    pub(crate) fn rollout<R: Rng>(&self, policy: &DeterministicPolicy, rng: &mut R) -> MeasurementVec {
        let mut sum = MeasurementVec::zeros(self.measurement_dim());
        let mut state = self.sample_initial(rng);
        let mut weight = 1.0;
        for _ in 0..self.episode_cap() {
            if self.is_terminal(state) {
                break;
            }
            let outcome = self.sample_outcome(rng, state, policy.action(state));
            for (acc, c) in sum.iter_mut().zip(&outcome.measurement) {
                *acc += weight * c;
            }
            state = outcome.next;
            weight *= self.discount();
        }
        sum
    }

    /// Samples one episode under `policy` from a seeded generator.
    pub fn simulate_episode(
        &self,
        policy: &DeterministicPolicy,
        seed: u64,
    ) -> Result<EpisodeTrace, MdpError> {
        self.check_policy(policy)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut steps = Vec::new();
        let mut sum = MeasurementVec::zeros(self.measurement_dim());
        let mut state = self.sample_initial(&mut rng);
        let mut weight = 1.0;
        for _ in 0..self.episode_cap() {
            if self.is_terminal(state) {
                break;
            }
            let action = policy.action(state);
            let outcome = self.sample_outcome(&mut rng, state, action);
            let measurement = MeasurementVec::from_column_slice(&outcome.measurement);
            sum.axpy(weight, &measurement, 1.0);
            steps.push(Step {
                state,
                action,
                measurement,
            });
            state = outcome.next;
            weight *= self.discount();
        }
        Ok(EpisodeTrace {
            steps,
            discounted_sum: sum,
        })
    }
}

/// Iterator over all deterministic policies of an MDP.
pub struct PolicyEnumerator {
    current: Option<Vec<usize>>,
    free: Vec<usize>,
    num_actions: usize,
}

impl Iterator for PolicyEnumerator {
    type Item = DeterministicPolicy;

    fn next(&mut self) -> Option<Self::Item> {
        let out = self.current.clone()?;
        let mut advanced = false;
        if let Some(cur) = self.current.as_mut() {
            for &s in &self.free {
                if cur[s] + 1 < self.num_actions {
                    cur[s] += 1;
                    advanced = true;
                    break;
                }
                cur[s] = 0;
            }
        }
        if !advanced {
            self.current = None;
        }
        Some(DeterministicPolicy(out))
    }
}
