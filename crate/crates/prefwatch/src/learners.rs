//! Learner models whose behavior a predictor later has to explain: bandits
//! and MDP agents that are either provably no-regret or Boltzmann-rational
//! with a shrinking estimation error.
//!
//! The interaction record deliberately splits into [`Behavior`], the part a
//! predictor may see (states, actions, counts), and the full
//! [`InteractionHistory`] that additionally carries realized rewards.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{
    argmax_lowest, boltzmann_policy, expected_policy_return, finite_horizon_optimal_return,
    Mdp, PolicyDist, QTable, RewardTable,
};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// How the synthesized estimate error of a Boltzmann-rational learner decays:
/// after `n` observations the estimate sits at distance `c * n^(alpha - 1)`
/// from the truth in sup norm, so cumulative error grows like `n^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSchedule {
    pub c: f64,
    pub alpha: f64,
    pub noise_mode: NoiseMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Error always points along the first coordinate axis.
    FixedDirection,
    /// Fresh uniform direction with unit sup norm each step.
    RandomDirection,
    /// Error of -1 on the truth's best action, pushing the estimate away
    /// from the right answer.
    AdversarialSign,
}

impl EstimateSchedule {
    pub fn new(c: f64, alpha: f64, noise_mode: NoiseMode) -> Result<Self, LearnerError> {
        if !c.is_finite() || c < 0.0 {
            return Err(LearnerError::InvalidArgument(format!(
                "schedule c must be finite and nonnegative, got {c}"
            )));
        }
        if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
            return Err(LearnerError::InvalidArgument(format!(
                "schedule alpha must lie strictly between 0 and 1, got {alpha}"
            )));
        }
        Ok(Self { c, alpha, noise_mode })
    }

    /// Sup-norm error after `count >= 1` observations.
    pub fn per_step_error(&self, count: usize) -> f64 {
        self.c * (count as f64).powf(self.alpha - 1.0)
    }

    /// Exact partial sum of per-step errors through `count` observations.
    pub fn cumulative_error(&self, count: usize) -> f64 {
        (1..=count).map(|i| self.per_step_error(i)).sum()
    }
}

/// Synthesize a reward estimate at exactly the scheduled distance from the
/// truth: `truth + c * count^(alpha-1) * eta` with `||eta||_inf = 1`.
pub fn synthesize_estimate(
    truth: &[f64],
    count: usize,
    schedule: &EstimateSchedule,
    rng: &mut impl Rng,
) -> Vec<f64> {
    assert!(count >= 1, "estimate count starts at 1");
    let magnitude = schedule.per_step_error(count);
    let n = truth.len();
    let mut out = truth.to_vec();
    match schedule.noise_mode {
        NoiseMode::FixedDirection => out[0] += magnitude,
        NoiseMode::AdversarialSign => {
            let best = argmax_lowest(truth);
            out[best] -= magnitude;
        }
        NoiseMode::RandomDirection => {
            let mut dir = vec![0.0_f64; n];
            let mut scale = 0.0;
            while scale == 0.0 {
                for d in dir.iter_mut() {
                    *d = rng.gen_range(-1.0..=1.0);
                }
                scale = dir.iter().fold(0.0_f64, |m, &d| m.max(d.abs()));
            }
            for (o, d) in out.iter_mut().zip(&dir) {
                *o += magnitude * d / scale;
            }
        }
    }
    out
}

/// The observable face of an interaction: states, actions, and derived
/// counts, with no reward information. Predictors see only this.
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    num_states: usize,
    num_actions: usize,
    steps: Vec<(usize, usize)>,
    state_counts: Vec<usize>,
    action_counts: Vec<Vec<usize>>,
    last_action: Vec<Option<usize>>,
    exploration_time: Vec<Option<usize>>,
}

impl Behavior {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            steps: Vec::new(),
            state_counts: vec![0; num_states],
            action_counts: vec![vec![0; num_actions]; num_states],
            last_action: vec![None; num_states],
            exploration_time: vec![None; num_states],
        }
    }

    pub fn push(&mut self, state: usize, action: usize) {
        assert!(state < self.num_states && action < self.num_actions);
        self.steps.push((state, action));
        self.state_counts[state] += 1;
        self.action_counts[state][action] += 1;
        self.last_action[state] = Some(action);
        if self.exploration_time[state].is_none()
            && self.action_counts[state].iter().all(|&c| c > 0)
        {
            // Counts through step t make predictions at step t+1 well defined.
            self.exploration_time[state] = Some(self.steps.len() + 1);
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }

    pub fn state_count(&self, state: usize) -> usize {
        self.state_counts[state]
    }

    pub fn action_count(&self, state: usize, action: usize) -> usize {
        self.action_counts[state][action]
    }

    pub fn action_counts(&self, state: usize) -> &[usize] {
        &self.action_counts[state]
    }

    pub fn last_action(&self, state: usize) -> Option<usize> {
        self.last_action[state]
    }

    /// First step index (1-based) at which every action has been seen in
    /// `state` strictly before it, i.e. the earliest step whose frequency
    /// estimate has full support. `None` until that happens.
    pub fn exploration_time(&self, state: usize) -> Option<usize> {
        self.exploration_time[state]
    }

    pub fn fully_explored(&self, state: usize) -> bool {
        self.exploration_time[state].is_some()
    }

    /// Reconstruct per-step prefix visit counts and exploration times from
    /// the raw step list.
    pub fn visit_series(&self) -> VisitSeries {
        let t = self.steps.len();
        let mut counts_before = Vec::with_capacity(t);
        let mut explored_from = vec![None; self.num_states];
        let mut running = vec![0usize; self.num_states];
        let mut seen = vec![vec![false; self.num_actions]; self.num_states];
        for (i, &(s, a)) in self.steps.iter().enumerate() {
            counts_before.push(running.clone());
            running[s] += 1;
            if !seen[s][a] {
                seen[s][a] = true;
                if seen[s].iter().all(|&x| x) {
                    explored_from[s] = Some(i + 2);
                }
            }
        }
        VisitSeries {
            counts_before,
            explored_from,
        }
    }
}

/// Per-step prefix visit counts: `counts_before[t-1][s]` is the number of
/// visits to `s` strictly before step `t`, and `explored_from[s]` the first
/// step with full action support at `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitSeries {
    pub counts_before: Vec<Vec<usize>>,
    pub explored_from: Vec<Option<usize>>,
}

/// Full interaction record: observable behavior plus realized rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionHistory {
    behavior: Behavior,
    rewards: Vec<f64>,
}

impl InteractionHistory {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            behavior: Behavior::new(num_states, num_actions),
            rewards: Vec::new(),
        }
    }

    pub fn push(&mut self, state: usize, action: usize, reward: f64) {
        self.behavior.push(state, action);
        self.rewards.push(reward);
    }

    pub fn behavior(&self) -> &Behavior {
        &self.behavior
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn len(&self) -> usize {
        self.behavior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.behavior.is_empty()
    }
}

/// The ground truth the learner is converging to: a bandit reward table or
/// the optimal Q table of an MDP.
#[derive(Debug, Clone, Copy)]
pub enum Truth<'a> {
    Reward(&'a RewardTable),
    Q(&'a QTable),
}

impl<'a> Truth<'a> {
    pub fn num_states(&self) -> usize {
        match self {
            Truth::Reward(_) => 1,
            Truth::Q(q) => q.num_states(),
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            Truth::Reward(r) => r.num_actions(),
            Truth::Q(q) => q.num_actions(),
        }
    }

    pub fn row(&self, state: usize) -> &[f64] {
        match self {
            Truth::Reward(r) => &r.values,
            Truth::Q(q) => q.row(state),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LearnerModel {
    /// Plays one fixed action forever.
    ConstantAction { action: usize },
    /// Plays each unseen action once per state, then commits to the
    /// empirically best one.
    ExploreThenCommit,
    /// Exponential weights over importance-weighted loss estimates, the
    /// loss of an action being its shortfall from the state's best value.
    /// `eta` defaults to `sqrt(8 ln |A| / T)` when not given.
    ExponentialWeights { eta: Option<f64> },
    /// Samples from a Boltzmann distribution over a synthesized estimate
    /// whose distance to the truth follows `schedule`.
    BoltzmannSynthesized {
        beta: f64,
        schedule: EstimateSchedule,
    },
    /// Plays the optimal action except for a `t^(alpha-1)` exploration
    /// probability spread uniformly over all actions.
    EpsilonMixedOptimal { alpha: f64 },
}

impl LearnerModel {
    pub fn is_boltzmann(&self) -> bool {
        matches!(self, LearnerModel::BoltzmannSynthesized { .. })
    }
}

/// Runtime state of a learner during one interaction.
pub struct Learner {
    model: LearnerModel,
    num_states: usize,
    num_actions: usize,
    eta: f64,
    cumulative_estimates: Vec<Vec<f64>>,
    observed: Vec<Vec<Option<f64>>>,
    committed: Vec<Option<usize>>,
    optimal_action: Vec<usize>,
    optimal_value: Vec<f64>,
}

impl Learner {
    pub fn new(model: LearnerModel, truth: &Truth, horizon: usize) -> Result<Self, LearnerError> {
        let num_states = truth.num_states();
        let num_actions = truth.num_actions();
        if horizon == 0 {
            return Err(LearnerError::InvalidArgument("horizon must be at least 1".into()));
        }
        match &model {
            LearnerModel::ConstantAction { action } if *action >= num_actions => {
                return Err(LearnerError::InvalidArgument(format!(
                    "fixed action {action} out of range for {num_actions} actions"
                )));
            }
            LearnerModel::BoltzmannSynthesized { beta, .. }
                if !beta.is_finite() || *beta < 0.0 =>
            {
                return Err(LearnerError::InvalidArgument(format!(
                    "beta must be finite and nonnegative, got {beta}"
                )));
            }
            LearnerModel::EpsilonMixedOptimal { alpha }
                if !alpha.is_finite() || *alpha <= 0.0 || *alpha >= 1.0 =>
            {
                return Err(LearnerError::InvalidArgument(format!(
                    "alpha must lie strictly between 0 and 1, got {alpha}"
                )));
            }
            LearnerModel::ExponentialWeights { eta: Some(e) }
                if !e.is_finite() || *e <= 0.0 =>
            {
                return Err(LearnerError::InvalidArgument(format!(
                    "eta must be finite and positive, got {e}"
                )));
            }
            _ => {}
        }
        let eta = match &model {
            LearnerModel::ExponentialWeights { eta } => eta
                .unwrap_or_else(|| (8.0 * (num_actions as f64).ln() / horizon as f64).sqrt()),
            _ => 0.0,
        };
        let optimal_action: Vec<usize> = (0..num_states)
            .map(|s| argmax_lowest(truth.row(s)))
            .collect();
        let optimal_value = optimal_action
            .iter()
            .enumerate()
            .map(|(s, &a)| truth.row(s)[a])
            .collect();
        Ok(Self {
            model,
            num_states,
            num_actions,
            eta,
            cumulative_estimates: vec![vec![0.0; num_actions]; num_states],
            observed: vec![vec![None; num_actions]; num_states],
            committed: vec![None; num_states],
            optimal_action,
            optimal_value,
        })
    }

    pub fn model(&self) -> &LearnerModel {
        &self.model
    }

    /// Realized estimate rows for every state at the given step, present
    /// only for the Boltzmann-synthesized model. `step` and the per-state
    /// visit counts are both 1-based observation indices.
    pub fn synthesize_step(
        &self,
        behavior: &Behavior,
        truth: &Truth,
        step: usize,
        rng: &mut impl Rng,
    ) -> Option<Vec<Vec<f64>>> {
        let LearnerModel::BoltzmannSynthesized { schedule, .. } = &self.model else {
            return None;
        };
        let rows = (0..self.num_states)
            .map(|s| {
                let count = if self.num_states == 1 {
                    step
                } else {
                    behavior.state_count(s) + 1
                };
                synthesize_estimate(truth.row(s), count, schedule, rng)
            })
            .collect();
        Some(rows)
    }

    /// Conditional action distribution at `state` for step `step`, given
    /// the estimates synthesized for this step (if any).
    pub fn policy(
        &self,
        estimates: Option<&[Vec<f64>]>,
        state: usize,
        step: usize,
    ) -> PolicyDist {
        match &self.model {
            LearnerModel::ConstantAction { action } => {
                PolicyDist::point_mass(self.num_actions, *action)
            }
            LearnerModel::ExploreThenCommit => {
                let a = self.committed[state].unwrap_or_else(|| {
                    self.observed[state]
                        .iter()
                        .position(|r| r.is_none())
                        .expect("uncommitted state must have an unplayed action")
                });
                PolicyDist::point_mass(self.num_actions, a)
            }
            LearnerModel::ExponentialWeights { .. } => {
                boltzmann_policy(&self.cumulative_estimates[state], self.eta)
                    .expect("finite weights")
            }
            LearnerModel::BoltzmannSynthesized { beta, .. } => {
                let rows = estimates.expect("boltzmann learner needs estimates");
                boltzmann_policy(&rows[state], *beta).expect("finite estimate")
            }
            LearnerModel::EpsilonMixedOptimal { alpha } => {
                let eps = (step as f64).powf(alpha - 1.0);
                let base = eps / self.num_actions as f64;
                let mut probs = vec![base; self.num_actions];
                probs[self.optimal_action[state]] += 1.0 - eps;
                PolicyDist::new(probs).expect("mixture is a distribution")
            }
        }
    }

    /// Policies for all states at once, the white-box view a verifier uses.
    pub fn policy_matrix(
        &self,
        estimates: Option<&[Vec<f64>]>,
        step: usize,
    ) -> Vec<PolicyDist> {
        (0..self.num_states)
            .map(|s| self.policy(estimates, s, step))
            .collect()
    }

    /// Digest the realized transition. `prob` is the probability the
    /// current policy assigned to the played action, needed for the
    /// importance-weighted exponential-weights update.
    pub fn observe(&mut self, state: usize, action: usize, reward: f64, prob: f64) {
        match &self.model {
            LearnerModel::ExploreThenCommit => {
                self.observed[state][action] = Some(reward);
                if self.committed[state].is_none()
                    && self.observed[state].iter().all(|r| r.is_some())
                {
                    let values: Vec<f64> =
                        self.observed[state].iter().map(|r| r.unwrap()).collect();
                    self.committed[state] = Some(argmax_lowest(&values));
                }
            }
            LearnerModel::ExponentialWeights { .. } => {
                let loss = self.optimal_value[state] - reward;
                self.cumulative_estimates[state][action] -= loss / prob;
            }
            _ => {}
        }
    }
}

/// One learner step against `history`: reconstructs the learner's internal
/// state by replaying the record, then samples an action for the current
/// state. Replay is exact for every model except Boltzmann synthesis, which
/// draws fresh noise from `rng`.
pub fn learner_step(
    model: &LearnerModel,
    history: &InteractionHistory,
    current_state: usize,
    truth: &Truth,
    horizon: usize,
    rng: &mut impl Rng,
) -> Result<usize, LearnerError> {
    let mut learner = Learner::new(model.clone(), truth, horizon)?;
    let behavior = history.behavior();
    for (i, (&(s, a), &r)) in behavior.steps().iter().zip(history.rewards()).enumerate() {
        let prob = if matches!(model, LearnerModel::ExponentialWeights { .. }) {
            learner.policy(None, s, i + 1).probs[a]
        } else {
            1.0
        };
        learner.observe(s, a, r, prob);
    }
    let step = history.len() + 1;
    let estimates = learner.synthesize_step(behavior, truth, step, rng);
    let policy = learner.policy(estimates.as_deref(), current_state, step);
    Ok(crate::env::sample_index(&policy.probs, rng))
}

/// Realized regret of a stateless interaction against the best fixed action:
/// the sum of per-step gaps `max_a R*(a) - R*(a_t)`.
pub fn measured_regret_stateless(history: &InteractionHistory, truth: &RewardTable) -> f64 {
    assert!(!history.is_empty(), "regret needs at least one step");
    let best = truth.max();
    history
        .behavior()
        .steps()
        .iter()
        .map(|&(_, a)| best - truth.values[a])
        .sum()
}

/// Expected-return shortfall of a time-indexed policy sequence against the
/// optimal policy for the same horizon.
pub fn measured_policy_regret(
    policies: &[Vec<PolicyDist>],
    mdp: &Mdp,
    horizon: usize,
) -> Result<f64, LearnerError> {
    if policies.len() != horizon || horizon == 0 {
        return Err(LearnerError::InvalidArgument(format!(
            "need one policy per step: got {} for horizon {horizon}",
            policies.len()
        )));
    }
    for (t, step) in policies.iter().enumerate() {
        if step.len() != mdp.num_states {
            return Err(LearnerError::InvalidArgument(format!(
                "policy at step {} covers {} states, expected {}",
                t + 1,
                step.len(),
                mdp.num_states
            )));
        }
        for (s, dist) in step.iter().enumerate() {
            if dist.len() != mdp.num_actions {
                return Err(LearnerError::InvalidArgument(format!(
                    "policy at step {} state {s} has {} actions, expected {}",
                    t + 1,
                    dist.len(),
                    mdp.num_actions
                )));
            }
        }
    }
    let optimal = finite_horizon_optimal_return(mdp, horizon)
        .map_err(|e| LearnerError::InvalidArgument(e.to_string()))?;
    Ok(optimal - expected_policy_return(mdp, policies))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bandit() -> RewardTable {
        RewardTable::new(vec![0.5, 1.0]).unwrap()
    }

    #[test]
    fn constant_learner_accumulates_gap_regret() {
        let truth = bandit();
        let mut history = InteractionHistory::new(1, 2);
        for _ in 0..14 {
            history.push(0, 0, truth.values[0]);
        }
        let regret = measured_regret_stateless(&history, &truth);
        assert!((regret - 7.0).abs() < 1e-12);
    }

    #[test]
    fn explore_then_commit_plays_each_action_once_then_best() {
        let truth = bandit();
        let t = Truth::Reward(&truth);
        let mut learner = Learner::new(LearnerModel::ExploreThenCommit, &t, 10).unwrap();
        let mut history = InteractionHistory::new(1, 2);
        let mut actions = Vec::new();
        for step in 1..=10 {
            let policy = learner.policy(None, 0, step);
            let a = argmax_lowest(&policy.probs);
            let r = truth.values[a];
            learner.observe(0, a, r, 1.0);
            history.push(0, a, r);
            actions.push(a);
        }
        assert_eq!(&actions[..3], &[0, 1, 1]);
        assert!(actions[2..].iter().all(|&a| a == 1));
        let regret = measured_regret_stateless(&history, &truth);
        assert!((regret - 0.5).abs() < 1e-12);
    }

    #[test]
    fn synthesized_estimate_sits_at_scheduled_distance() {
        let schedule = EstimateSchedule::new(1.0, 0.5, NoiseMode::FixedDirection).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let truth = [0.3, 0.7, 0.1];
        for count in [1usize, 4, 100] {
            let est = synthesize_estimate(&truth, count, &schedule, &mut rng);
            let dist = est
                .iter()
                .zip(&truth)
                .map(|(e, t)| (e - t).abs())
                .fold(0.0_f64, f64::max);
            let want = (count as f64).powf(-0.5);
            assert!((dist - want).abs() < 1e-12, "count {count}: {dist} vs {want}");
        }
    }

    #[test]
    fn random_direction_noise_has_unit_sup_norm() {
        let schedule = EstimateSchedule::new(2.0, 0.5, NoiseMode::RandomDirection).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = [0.0, 0.0, 0.0, 0.0];
        for _ in 0..200 {
            let est = synthesize_estimate(&truth, 16, &schedule, &mut rng);
            let dist = est.iter().map(|e| e.abs()).fold(0.0_f64, f64::max);
            assert!((dist - 2.0 * 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn adversarial_sign_noise_hits_the_best_action() {
        let schedule = EstimateSchedule::new(0.5, 0.5, NoiseMode::AdversarialSign).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let truth = [0.2, 0.9, 0.4];
        let est = synthesize_estimate(&truth, 1, &schedule, &mut rng);
        assert!((est[1] - 0.4).abs() < 1e-12);
        assert!((est[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn cumulative_error_matches_partial_sum() {
        let schedule = EstimateSchedule::new(1.0, 0.5, NoiseMode::FixedDirection).unwrap();
        assert!((schedule.cumulative_error(100) - 18.58960382478415).abs() < 1e-10);
        // Stays sublinear: well under n^alpha times a small constant.
        assert!(schedule.cumulative_error(100_000) <= 2.0 * (100_000f64).powf(0.5));
    }

    #[test]
    fn epsilon_mixed_policy_shrinks_exploration() {
        let truth = RewardTable::new(vec![0.2, 0.8, 0.5]).unwrap();
        let t = Truth::Reward(&truth);
        let learner =
            Learner::new(LearnerModel::EpsilonMixedOptimal { alpha: 0.5 }, &t, 100).unwrap();
        let p1 = learner.policy(None, 0, 1);
        for &x in &p1.probs {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
        let p100 = learner.policy(None, 0, 100);
        let eps = 0.1;
        assert!((p100.probs[1] - (1.0 - eps + eps / 3.0)).abs() < 1e-12);
        assert!((p100.probs[0] - eps / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exploration_time_flips_when_all_actions_seen() {
        let mut behavior = Behavior::new(1, 3);
        behavior.push(0, 2);
        assert_eq!(behavior.exploration_time(0), None);
        behavior.push(0, 2);
        behavior.push(0, 0);
        assert_eq!(behavior.exploration_time(0), None);
        behavior.push(0, 1);
        assert_eq!(behavior.exploration_time(0), Some(5));
        behavior.push(0, 0);
        assert_eq!(behavior.exploration_time(0), Some(5));
    }

    #[test]
    fn visit_series_matches_incremental_counts() {
        let mut behavior = Behavior::new(2, 2);
        for &(s, a) in &[(0, 0), (1, 1), (0, 1), (0, 0), (1, 0)] {
            behavior.push(s, a);
        }
        let series = behavior.visit_series();
        assert_eq!(series.counts_before[0], vec![0, 0]);
        assert_eq!(series.counts_before[2], vec![1, 1]);
        assert_eq!(series.counts_before[4], vec![3, 1]);
        assert_eq!(series.explored_from, vec![Some(4), Some(6)]);
        assert_eq!(
            series.explored_from,
            (0..2).map(|s| behavior.exploration_time(s)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn uniform_policy_regret_matches_hand_expectation() {
        // Two states, two actions, deterministic swap dynamics.
        let transition = vec![
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        ];
        let reward = QTable::new(vec![vec![1.0, 0.0], vec![0.5, 0.25]]).unwrap();
        let mdp = Mdp::new(
            2,
            2,
            transition,
            vec![1.0, 0.0],
            std::collections::BTreeSet::new(),
            reward,
        )
        .unwrap();
        let uniform: Vec<Vec<PolicyDist>> =
            (0..3).map(|_| vec![PolicyDist::uniform(2); 2]).collect();
        let regret = measured_policy_regret(&uniform, &mdp, 3).unwrap();
        let optimal = finite_horizon_optimal_return(&mdp, 3).unwrap();
        let achieved = expected_policy_return(&mdp, &uniform);
        assert!((regret - (optimal - achieved)).abs() < 1e-12);
        assert!(regret > 0.0);
    }

    #[test]
    fn policy_regret_rejects_mismatched_shapes() {
        let transition = vec![vec![vec![1.0]]];
        let reward = QTable::new(vec![vec![0.0]]).unwrap();
        let mdp = Mdp::new(
            1,
            1,
            transition,
            vec![1.0],
            std::collections::BTreeSet::new(),
            reward,
        )
        .unwrap();
        let wrong_len = vec![vec![PolicyDist::uniform(1)]];
        assert!(measured_policy_regret(&wrong_len, &mdp, 2).is_err());
    }

    #[test]
    fn learner_step_replays_exp_weights_deterministically() {
        let truth = bandit();
        let t = Truth::Reward(&truth);
        let model = LearnerModel::ExponentialWeights { eta: Some(0.5) };
        let mut history = InteractionHistory::new(1, 2);
        history.push(0, 0, 0.5);
        history.push(0, 1, 1.0);
        let mut rng_a = ChaCha8Rng::seed_from_u64(3);
        let mut rng_b = ChaCha8Rng::seed_from_u64(3);
        let a = learner_step(&model, &history, 0, &t, 10, &mut rng_a).unwrap();
        let b = learner_step(&model, &history, 0, &t, 10, &mut rng_b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn learner_rejects_out_of_range_fixed_action() {
        let truth = bandit();
        let t = Truth::Reward(&truth);
        assert!(Learner::new(LearnerModel::ConstantAction { action: 2 }, &t, 10).is_err());
    }
}
