//! Prediction-quality measures: best-response loss, Boltzmann policy KL,
//! and cumulative norm distances, in stateless and stateful forms.
//!
//! Stateful measures weight each step by how familiar the visited state is;
//! the standard choice is `sqrt(N_{t-1}(s) / (t-1))`, the square root of
//! the empirical visit frequency.

use thiserror::Error;

use crate::env::{
    argmax_lowest, boltzmann_policy, expected_policy_return, finite_horizon_optimal_return,
    Mdp, PolicyDist, QTable, RewardTable,
};
use crate::learners::VisitSeries;
use crate::predictors::QEstimate;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Kullback-Leibler divergence `KL(p || q)` in nats. Zero-probability
/// entries of `p` contribute nothing; mass of `p` outside the support of
/// `q` makes the divergence infinite.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        total += pi * (pi / qi).ln();
    }
    total
}

/// Total variation distance, half the l1 distance.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    Linf,
}

fn row_norm(pred: &[f64], truth: &[f64], kind: NormKind) -> f64 {
    match kind {
        NormKind::L2 => pred
            .iter()
            .zip(truth)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
        NormKind::Linf => pred
            .iter()
            .zip(truth)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max),
    }
}

/// Per-step weighting of stateful measures.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightingScheme {
    /// `sqrt(N_{t-1}(s) / (t-1))`, zero at the first step.
    SqrtVisitFrequency,
    /// Every step weighs 1.
    Uniform,
    /// A fixed per-state weight.
    Custom(Vec<f64>),
}

impl WeightingScheme {
    /// Weight of step `t` (1-based) at `state` given the number of visits
    /// to that state strictly before `t`.
    pub fn weight(&self, t: usize, state: usize, visits_before: usize) -> f64 {
        match self {
            WeightingScheme::SqrtVisitFrequency => {
                if t <= 1 {
                    0.0
                } else {
                    (visits_before as f64 / (t - 1) as f64).sqrt()
                }
            }
            WeightingScheme::Uniform => 1.0,
            WeightingScheme::Custom(w) => w[state],
        }
    }
}

/// Loss of best-responding to each prediction instead of the truth:
/// the sum of `max_a R*(a) - R*(argmax_a R_t(a))` over the trace.
pub fn d_br_stateless(truth: &RewardTable, trace: &[RewardTable]) -> f64 {
    trace
        .iter()
        .map(|pred| step_br_stateless(truth, pred))
        .sum()
}

/// One term of [`d_br_stateless`].
pub fn step_br_stateless(truth: &RewardTable, pred: &RewardTable) -> f64 {
    truth.max() - truth.values[pred.argmax()]
}

/// Greedy deterministic policy induced by a Q prediction; absent rows fall
/// back to action 0, matching a best responder with nothing to go on.
pub fn greedy_policy_step(est: &QEstimate, num_actions: usize) -> Vec<PolicyDist> {
    est.rows
        .iter()
        .map(|row| {
            let pick = row.as_deref().map_or(0, argmax_lowest);
            PolicyDist::point_mass(num_actions, pick)
        })
        .collect()
}

/// Stateful best-response loss: the optimal expected return over the trace
/// horizon minus the expected return of following each step's greedy
/// prediction policy.
pub fn d_br_stateful(mdp: &Mdp, trace: &[QEstimate]) -> Result<f64, MeasureError> {
    if trace.is_empty() {
        return Err(MeasureError::InvalidArgument("empty trace".into()));
    }
    for (t, est) in trace.iter().enumerate() {
        if est.num_states() != mdp.num_states {
            return Err(MeasureError::InvalidArgument(format!(
                "trace entry {} covers {} states, expected {}",
                t + 1,
                est.num_states(),
                mdp.num_states
            )));
        }
    }
    let horizon = trace.len();
    let policies: Vec<Vec<PolicyDist>> = trace
        .iter()
        .map(|est| greedy_policy_step(est, mdp.num_actions))
        .collect();
    let optimal = finite_horizon_optimal_return(mdp, horizon)
        .map_err(|e| MeasureError::InvalidArgument(e.to_string()))?;
    Ok(optimal - expected_policy_return(mdp, &policies))
}

/// Cumulative KL between the Boltzmann policies of prediction and truth.
pub fn d_klbp_stateless(truth: &RewardTable, trace: &[RewardTable], beta: f64) -> f64 {
    let truth_policy = boltzmann_policy(&truth.values, beta).expect("finite truth");
    trace
        .iter()
        .map(|pred| {
            let p = boltzmann_policy(&pred.values, beta).expect("finite prediction");
            kl_divergence(&p.probs, &truth_policy.probs)
        })
        .sum()
}

/// One step of the stateful Boltzmann-policy KL measure: present rows
/// contribute their weighted KL, absent rows contribute nothing.
pub fn step_klbp_stateful(
    truth: &QTable,
    est: &QEstimate,
    beta: f64,
    weighting: &WeightingScheme,
    t: usize,
    visits_before: &[usize],
) -> f64 {
    let mut total = 0.0;
    for s in 0..truth.num_states() {
        let Some(row) = est.row(s) else { continue };
        let w = weighting.weight(t, s, visits_before[s]);
        if w == 0.0 {
            continue;
        }
        let p = boltzmann_policy(row, beta).expect("finite prediction");
        let q = boltzmann_policy(truth.row(s), beta).expect("finite truth");
        total += w * kl_divergence(&p.probs, &q.probs);
    }
    total
}

pub fn d_klbp_stateful(
    truth: &QTable,
    trace: &[QEstimate],
    beta: f64,
    weighting: &WeightingScheme,
    series: &VisitSeries,
) -> f64 {
    trace
        .iter()
        .enumerate()
        .map(|(i, est)| {
            step_klbp_stateful(truth, est, beta, weighting, i + 1, &series.counts_before[i])
        })
        .sum()
}

/// Cumulative norm distance of a stateless trace to the truth.
pub fn norm_distance_stateless(
    truth: &RewardTable,
    trace: &[RewardTable],
    kind: NormKind,
) -> f64 {
    trace
        .iter()
        .map(|pred| row_norm(&pred.values, &truth.values, kind))
        .sum()
}

/// One step of the stateful norm measure. A state counts only once its
/// action support is complete (from `explored_from[s]` on) and its row is
/// present, so traces are compared on the window where a frequency-based
/// prediction is even defined.
pub fn step_norm_stateful(
    truth: &QTable,
    est: &QEstimate,
    kind: NormKind,
    weighting: &WeightingScheme,
    t: usize,
    visits_before: &[usize],
    explored_from: &[Option<usize>],
) -> f64 {
    let mut total = 0.0;
    for s in 0..truth.num_states() {
        let Some(row) = est.row(s) else { continue };
        if !explored_from[s].is_some_and(|te| t >= te) {
            continue;
        }
        let w = weighting.weight(t, s, visits_before[s]);
        if w == 0.0 {
            continue;
        }
        total += w * row_norm(row, truth.row(s), kind);
    }
    total
}

pub fn norm_distance_stateful(
    truth: &QTable,
    trace: &[QEstimate],
    kind: NormKind,
    weighting: &WeightingScheme,
    series: &VisitSeries,
) -> f64 {
    trace
        .iter()
        .enumerate()
        .map(|(i, est)| {
            step_norm_stateful(
                truth,
                est,
                kind,
                weighting,
                i + 1,
                &series.counts_before[i],
                &series.explored_from,
            )
        })
        .sum()
}
