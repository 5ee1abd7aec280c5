//! Tabular environments: stateless reward tables, finite MDPs with exact
//! solvers, and Boltzmann policy construction.
//!
//! Everything here is plain data, immutable after construction. RNG state is
//! owned by the caller and passed in explicitly, so all sampling is
//! reproducible from the caller's seed.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for probability and normalization invariants at construction.
/// Rows within this tolerance are accepted and renormalized exactly once.
pub const PROB_TOL: f64 = 1e-9;

/// Value-iteration iterates above this magnitude are treated as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(
        "divergent mdp: residual {residual:.3e} after {iterations} iterations; \
         the undiscounted fixed point exists only when every policy eventually \
         reaches a terminal state"
    )]
    DivergentMdp { iterations: usize, residual: f64 },
}

fn check_finite(values: &[f64], what: &str) -> Result<(), EnvError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EnvError::InvalidArgument(format!(
            "{what} must contain only finite values"
        )));
    }
    Ok(())
}

/// Index of the largest entry, breaking ties toward the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Stateless reward table over a finite action set.
///
/// `sigma` records the normalization target `sum_a values[a]` when the table
/// is meant to live on a known simplex slice; predictors that can only
/// recover rewards up to a constant shift use it to pin the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl RewardTable {
    pub fn new(values: Vec<f64>) -> Result<Self, EnvError> {
        Self::with_sigma(values, None)
    }

    pub fn with_sigma(values: Vec<f64>, sigma: Option<f64>) -> Result<Self, EnvError> {
        if values.is_empty() {
            return Err(EnvError::InvalidArgument(
                "reward table needs at least one action".into(),
            ));
        }
        check_finite(&values, "reward table")?;
        if let Some(s) = sigma {
            let sum: f64 = values.iter().sum();
            if !s.is_finite() || (sum - s).abs() > PROB_TOL {
                return Err(EnvError::InvalidArgument(format!(
                    "sigma {s} does not match value sum {sum}"
                )));
            }
        }
        Ok(Self { values, sigma })
    }

    pub fn num_actions(&self) -> usize {
        self.values.len()
    }

    /// Best action, ties broken toward the lowest index.
    pub fn argmax(&self) -> usize {
        argmax_lowest(&self.values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// State-action value table, one row per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
}

impl QTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, EnvError> {
        Self::with_sigma(rows, None)
    }

    pub fn with_sigma(rows: Vec<Vec<f64>>, sigma: Option<Vec<f64>>) -> Result<Self, EnvError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(EnvError::InvalidArgument(
                "q table needs at least one state and one action".into(),
            ));
        }
        let width = rows[0].len();
        for (s, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(EnvError::InvalidArgument(format!(
                    "q table row {s} has {} entries, expected {width}",
                    row.len()
                )));
            }
            check_finite(row, "q table")?;
        }
        if let Some(ref sig) = sigma {
            if sig.len() != rows.len() {
                return Err(EnvError::InvalidArgument(
                    "sigma vector length must match the number of states".into(),
                ));
            }
            for (s, (&target, row)) in sig.iter().zip(&rows).enumerate() {
                let sum: f64 = row.iter().sum();
                if !target.is_finite() || (sum - target).abs() > PROB_TOL {
                    return Err(EnvError::InvalidArgument(format!(
                        "sigma[{s}] = {target} does not match row sum {sum}"
                    )));
                }
            }
        }
        Ok(Self { rows, sigma })
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn num_actions(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.rows[state]
    }

    /// Per-state row sums, the natural `sigma` vector for this table.
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().sum()).collect()
    }
}

/// Probability distribution over actions (or states).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDist {
    pub probs: Vec<f64>,
}

impl PolicyDist {
    /// Validates entries within [`PROB_TOL`] of a distribution, clamps
    /// negative rounding dust to zero, and renormalizes exactly once.
    pub fn new(probs: Vec<f64>) -> Result<Self, EnvError> {
        if probs.is_empty() {
            return Err(EnvError::InvalidArgument(
                "distribution needs at least one entry".into(),
            ));
        }
        check_finite(&probs, "distribution")?;
        let mut probs = probs;
        for p in probs.iter_mut() {
            if *p < -PROB_TOL {
                return Err(EnvError::InvalidArgument(format!(
                    "distribution entry {p} is negative"
                )));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(EnvError::InvalidArgument(format!(
                "distribution sums to {sum}, expected 1"
            )));
        }
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, index: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Boltzmann (softmax) distribution `p(a) ∝ exp(beta * values[a])`.
///
/// Stabilized by max subtraction, so it stays exact for logits up to at
/// least 1e4 in magnitude. `beta = 0` yields the uniform distribution;
/// shifting every value by a constant leaves the result unchanged.
pub fn boltzmann_policy(values: &[f64], beta: f64) -> Result<PolicyDist, EnvError> {
    if values.is_empty() {
        return Err(EnvError::InvalidArgument(
            "boltzmann policy needs at least one action".into(),
        ));
    }
    check_finite(values, "boltzmann values")?;
    if !beta.is_finite() || beta < 0.0 {
        return Err(EnvError::InvalidArgument(format!(
            "beta must be finite and nonnegative, got {beta}"
        )));
    }
    let top = values
        .iter()
        .map(|v| beta * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = values.iter().map(|v| (beta * v - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(PolicyDist {
        probs: weights.iter().map(|w| w / total).collect(),
    })
}

/// Draw an index from an explicit probability vector.
pub fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        cum += p;
        if u < cum {
            return i;
        }
    }
    last_positive
}

/// Finite MDP with undiscounted episodic semantics: terminal states are
/// absorbing self-loops with zero reward, and the interaction simply keeps
/// running in place once one is reached.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    pub num_states: usize,
    pub num_actions: usize,
    /// `transition[s][a][s']`, each `[s][a]` row a distribution over states.
    pub transition: Vec<Vec<Vec<f64>>>,
    pub initial_dist: Vec<f64>,
    pub terminals: BTreeSet<usize>,
    /// True reward `R*(s, a)`.
    pub reward: QTable,
}

impl Mdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<Vec<Vec<f64>>>,
        initial_dist: Vec<f64>,
        terminals: BTreeSet<usize>,
        reward: QTable,
    ) -> Result<Self, EnvError> {
        if num_states == 0 || num_actions == 0 {
            return Err(EnvError::InvalidArgument(
                "mdp needs at least one state and one action".into(),
            ));
        }
        if reward.num_states() != num_states || reward.num_actions() != num_actions {
            return Err(EnvError::InvalidArgument(format!(
                "reward table is {}x{}, expected {num_states}x{num_actions}",
                reward.num_states(),
                reward.num_actions()
            )));
        }
        if transition.len() != num_states {
            return Err(EnvError::InvalidArgument(format!(
                "transition has {} state rows, expected {num_states}",
                transition.len()
            )));
        }
        let mut transition = transition;
        for (s, per_action) in transition.iter_mut().enumerate() {
            if per_action.len() != num_actions {
                return Err(EnvError::InvalidArgument(format!(
                    "transition[{s}] has {} action rows, expected {num_actions}",
                    per_action.len()
                )));
            }
            for (a, row) in per_action.iter_mut().enumerate() {
                if row.len() != num_states {
                    return Err(EnvError::InvalidArgument(format!(
                        "transition[{s}][{a}] has {} entries, expected {num_states}",
                        row.len()
                    )));
                }
                normalize_prob_row(row, &format!("transition[{s}][{a}]"))?;
            }
        }
        let mut initial_dist = initial_dist;
        if initial_dist.len() != num_states {
            return Err(EnvError::InvalidArgument(format!(
                "initial_dist has {} entries, expected {num_states}",
                initial_dist.len()
            )));
        }
        normalize_prob_row(&mut initial_dist, "initial_dist")?;
        let mut reward = reward;
        for &term in &terminals {
            if term >= num_states {
                return Err(EnvError::InvalidArgument(format!(
                    "terminal state {term} out of range"
                )));
            }
            for a in 0..num_actions {
                let row = &mut transition[term][a];
                for (sp, p) in row.iter_mut().enumerate() {
                    let want = if sp == term { 1.0 } else { 0.0 };
                    if (*p - want).abs() > PROB_TOL {
                        return Err(EnvError::InvalidArgument(format!(
                            "terminal state {term} must self-loop, but \
                             transition[{term}][{a}][{sp}] = {p}"
                        )));
                    }
                    *p = want;
                }
                let r = &mut reward.rows[term][a];
                if r.abs() > PROB_TOL {
                    return Err(EnvError::InvalidArgument(format!(
                        "terminal state {term} must have zero reward, got {r}"
                    )));
                }
                *r = 0.0;
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            transition,
            initial_dist,
            terminals,
            reward,
        })
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminals.contains(&state)
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.reward.rows[state][action]
    }

    pub fn transition_row(&self, state: usize, action: usize) -> &[f64] {
        &self.transition[state][action]
    }
}

fn normalize_prob_row(row: &mut [f64], what: &str) -> Result<(), EnvError> {
    check_finite(row, what)?;
    for p in row.iter_mut() {
        if *p < -PROB_TOL {
            return Err(EnvError::InvalidArgument(format!(
                "{what} has negative entry {p}"
            )));
        }
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(EnvError::InvalidArgument(format!(
            "{what} sums to {sum}, expected 1"
        )));
    }
    for p in row.iter_mut() {
        *p /= sum;
    }
    Ok(())
}

/// Undiscounted fixed-point solve of `Q(s,a) = R(s,a) + E[max_a' Q(s',a')]`.
///
/// Converges only on proper MDPs, where every policy is eventually absorbed
/// by a terminal state. The returned table's Bellman residual is at most
/// `tol` at every state-action pair; non-contracting instances surface as
/// [`EnvError::DivergentMdp`].
pub fn solve_q_star(mdp: &Mdp, tol: f64, max_iter: usize) -> Result<QTable, EnvError> {
    if tol.is_nan() || tol <= 0.0 || max_iter == 0 {
        return Err(EnvError::InvalidArgument(
            "solve_q_star needs tol > 0 and max_iter >= 1".into(),
        ));
    }
    let mut q = vec![vec![0.0; mdp.num_actions]; mdp.num_states];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = bellman_backup(mdp, &q);
        residual = 0.0_f64;
        for s in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                residual = residual.max((next[s][a] - q[s][a]).abs());
                if next[s][a].abs() > DIVERGENCE_THRESHOLD {
                    return Err(EnvError::DivergentMdp {
                        iterations: max_iter,
                        residual,
                    });
                }
            }
        }
        if residual <= tol {
            // `q` itself satisfies the residual bound; `next` is one backup
            // further along but carries no certificate.
            return QTable::new(q);
        }
        q = next;
    }
    Err(EnvError::DivergentMdp {
        iterations: max_iter,
        residual,
    })
}

fn bellman_backup(mdp: &Mdp, q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let greedy: Vec<f64> = q
        .iter()
        .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut next = vec![vec![0.0; mdp.num_actions]; mdp.num_states];
    for s in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            let mut cont = 0.0;
            for (sp, &p) in mdp.transition[s][a].iter().enumerate() {
                if p > 0.0 {
                    cont += p * greedy[sp];
                }
            }
            next[s][a] = mdp.reward(s, a) + cont;
        }
    }
    next
}

/// Optimal values-to-go `W[k][s]` for `k = 0..=horizon` remaining steps.
pub fn optimal_values_to_go(mdp: &Mdp, horizon: usize) -> Vec<Vec<f64>> {
    let mut w = Vec::with_capacity(horizon + 1);
    w.push(vec![0.0; mdp.num_states]);
    for k in 1..=horizon {
        let prev = &w[k - 1];
        let mut cur = vec![0.0; mdp.num_states];
        for s in 0..mdp.num_states {
            let mut best = f64::NEG_INFINITY;
            for a in 0..mdp.num_actions {
                let mut v = mdp.reward(s, a);
                for (sp, &p) in mdp.transition[s][a].iter().enumerate() {
                    if p > 0.0 {
                        v += p * prev[sp];
                    }
                }
                best = best.max(v);
            }
            cur[s] = best;
        }
        w.push(cur);
    }
    w
}

/// Backward induction over time-indexed values; returns the first-step
/// Q slice, i.e. `Q(s,a)` with `horizon` steps remaining.
pub fn solve_q_star_horizon(mdp: &Mdp, horizon: usize) -> Result<QTable, EnvError> {
    if horizon == 0 {
        return Err(EnvError::InvalidArgument("horizon must be at least 1".into()));
    }
    let w = optimal_values_to_go(mdp, horizon - 1);
    let last = &w[horizon - 1];
    let mut rows = vec![vec![0.0; mdp.num_actions]; mdp.num_states];
    for s in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            let mut v = mdp.reward(s, a);
            for (sp, &p) in mdp.transition[s][a].iter().enumerate() {
                if p > 0.0 {
                    v += p * last[sp];
                }
            }
            rows[s][a] = v;
        }
    }
    QTable::new(rows)
}

/// Best expected cumulative reward achievable over `horizon` steps from the
/// initial distribution.
pub fn finite_horizon_optimal_return(mdp: &Mdp, horizon: usize) -> Result<f64, EnvError> {
    if horizon == 0 {
        return Err(EnvError::InvalidArgument("horizon must be at least 1".into()));
    }
    let w = optimal_values_to_go(mdp, horizon);
    Ok(mdp
        .initial_dist
        .iter()
        .zip(&w[horizon])
        .map(|(p, v)| p * v)
        .sum())
}

/// Optimal returns for every prefix horizon `1..=horizon` in one backward
/// sweep. `result[t-1]` equals `finite_horizon_optimal_return(mdp, t)`.
pub fn optimal_prefix_returns(mdp: &Mdp, horizon: usize) -> Vec<f64> {
    let w = optimal_values_to_go(mdp, horizon);
    (1..=horizon)
        .map(|t| {
            mdp.initial_dist
                .iter()
                .zip(&w[t])
                .map(|(p, v)| p * v)
                .sum()
        })
        .collect()
}

/// State distribution pushed forward one policy step at a time.
pub struct ForwardFlow {
    pub dist: Vec<f64>,
}

impl ForwardFlow {
    pub fn new(mdp: &Mdp) -> Self {
        Self {
            dist: mdp.initial_dist.clone(),
        }
    }

    /// Advance by one step under `prob(s, a)` and return the expected
    /// reward collected at this step.
    pub fn step(&mut self, mdp: &Mdp, prob: impl Fn(usize, usize) -> f64) -> f64 {
        let mut gained = 0.0;
        let mut next = vec![0.0; mdp.num_states];
        for s in 0..mdp.num_states {
            let ps = self.dist[s];
            if ps == 0.0 {
                continue;
            }
            for a in 0..mdp.num_actions {
                let pa = prob(s, a);
                if pa == 0.0 {
                    continue;
                }
                gained += ps * pa * mdp.reward(s, a);
                for (sp, &pt) in mdp.transition[s][a].iter().enumerate() {
                    if pt > 0.0 {
                        next[sp] += ps * pa * pt;
                    }
                }
            }
        }
        self.dist = next;
        gained
    }
}

/// Expected return of an explicit time-indexed stochastic policy sequence,
/// computed by exact forward propagation.
pub fn expected_policy_return(mdp: &Mdp, policies: &[Vec<PolicyDist>]) -> f64 {
    let mut flow = ForwardFlow::new(mdp);
    let mut total = 0.0;
    for step in policies {
        total += flow.step(mdp, |s, a| step[s].probs[a]);
    }
    total
}

/// Sample the successor state of `(state, action)`.
pub fn sample_transition(mdp: &Mdp, state: usize, action: usize, rng: &mut impl Rng) -> usize {
    sample_index(&mdp.transition[state][action], rng)
}

/// Sample a start state from the initial distribution.
pub fn sample_initial(mdp: &Mdp, rng: &mut impl Rng) -> usize {
    sample_index(&mdp.initial_dist, rng)
}

/// Either a stateless bandit reward table or a full MDP.
#[derive(Debug, Clone, PartialEq)]
pub enum Environment {
    Bandit(RewardTable),
    Mdp(Mdp),
}

impl Environment {
    pub fn num_actions(&self) -> usize {
        match self {
            Environment::Bandit(r) => r.num_actions(),
            Environment::Mdp(m) => m.num_actions,
        }
    }

    pub fn num_states(&self) -> usize {
        match self {
            Environment::Bandit(_) => 1,
            Environment::Mdp(m) => m.num_states,
        }
    }

    pub fn is_stateful(&self) -> bool {
        matches!(self, Environment::Mdp(_))
    }
}

/// JSON shape of an environment definition. A document with `num_states`
/// and `transition` keys is a full MDP; a document with just a reward
/// vector is a bandit.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvironmentDef {
    Mdp(MdpSpec),
    Bandit(BanditSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditSpec {
    pub reward: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_actions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub initial_dist: Vec<f64>,
    #[serde(default)]
    pub terminals: Vec<usize>,
    pub reward: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
}

impl EnvironmentDef {
    pub fn build(&self) -> Result<Environment, EnvError> {
        match self {
            EnvironmentDef::Bandit(spec) => {
                if let Some(n) = spec.num_actions {
                    if n != spec.reward.len() {
                        return Err(EnvError::InvalidArgument(format!(
                            "num_actions {n} does not match reward length {}",
                            spec.reward.len()
                        )));
                    }
                }
                Ok(Environment::Bandit(RewardTable::with_sigma(
                    spec.reward.clone(),
                    spec.sigma,
                )?))
            }
            EnvironmentDef::Mdp(spec) => {
                let reward = QTable::with_sigma(spec.reward.clone(), spec.sigma.clone())?;
                Ok(Environment::Mdp(Mdp::new(
                    spec.num_states,
                    spec.num_actions,
                    spec.transition.clone(),
                    spec.initial_dist.clone(),
                    spec.terminals.iter().cloned().collect(),
                    reward,
                )?))
            }
        }
    }
}
