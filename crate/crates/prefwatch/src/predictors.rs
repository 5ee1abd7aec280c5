//! Predictors that watch only states and actions and output reward (or Q)
//! estimates, plus the reductions between per-step and final prediction.
//!
//! None of these ever touch realized rewards or learner internals: every
//! input is a [`Behavior`] or data derived from one.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{argmax_lowest, sample_index, RewardTable};
use crate::learners::Behavior;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error(
        "not yet explored: action frequencies lack full support, so the \
         log-frequency inversion is undefined"
    )]
    NotYetExplored,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    BestResponse,
    Averaging,
    ConstantZero,
}

/// Per-step reward predictions for a stateless interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct StatelessTrace {
    pub kind: PredictorKind,
    pub predictions: Vec<RewardTable>,
}

/// A per-state Q prediction where some rows may be absent because the
/// predictor had nothing to say about that state yet.
#[derive(Debug, Clone, PartialEq)]
pub struct QEstimate {
    pub rows: Vec<Option<Vec<f64>>>,
}

impl QEstimate {
    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, state: usize) -> Option<&[f64]> {
        self.rows[state].as_deref()
    }
}

/// Per-step Q predictions for a stateful interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct StatefulTrace {
    pub kind: PredictorKind,
    pub predictions: Vec<QEstimate>,
}

/// Indicator reward on the learner's previous action: 1 on the action just
/// played, 0 elsewhere. Before anything is observed it backs action 0.
pub fn best_response_stateless(behavior: &Behavior) -> RewardTable {
    let n = behavior.num_actions();
    let pick = behavior.last_action(0).unwrap_or(0);
    let mut values = vec![0.0; n];
    values[pick] = 1.0;
    RewardTable { values, sigma: Some(1.0) }
}

/// One indicator row per state on the action last played there; states
/// never visited back action 0.
pub fn best_response_stateful(behavior: &Behavior) -> QEstimate {
    let n = behavior.num_actions();
    let rows = (0..behavior.num_states())
        .map(|s| {
            let pick = behavior.last_action(s).unwrap_or(0);
            let mut row = vec![0.0; n];
            row[pick] = 1.0;
            Some(row)
        })
        .collect();
    QEstimate { rows }
}

/// Invert empirical action frequencies through the Boltzmann link:
/// `R(a) = (log p(a) - mean_a' log p(a')) / beta + sigma / |A|`.
///
/// `counts` are the per-action play counts so far; every action must have
/// been seen at least once. The output sums to `sigma` exactly up to
/// rounding, which pins the shift the log-frequency view cannot see.
pub fn averaging_predictor_stateless(
    counts: &[usize],
    beta: f64,
    sigma: f64,
) -> Result<RewardTable, PredictError> {
    let row = averaging_row(counts, beta, sigma)?;
    Ok(RewardTable { values: row, sigma: Some(sigma) })
}

/// Per-state frequency inversion. A state whose actions lack full support
/// (including never-visited states) gets an absent row rather than a guess.
pub fn averaging_predictor_stateful(
    counts: &[Vec<usize>],
    beta: f64,
    sigma: &[f64],
) -> Result<QEstimate, PredictError> {
    if counts.len() != sigma.len() {
        return Err(PredictError::InvalidArgument(format!(
            "{} count rows but {} sigma entries",
            counts.len(),
            sigma.len()
        )));
    }
    let rows = counts
        .iter()
        .zip(sigma)
        .map(|(c, &sig)| averaging_row(c, beta, sig).ok())
        .collect();
    Ok(QEstimate { rows })
}

fn averaging_row(counts: &[usize], beta: f64, sigma: f64) -> Result<Vec<f64>, PredictError> {
    if counts.is_empty() {
        return Err(PredictError::InvalidArgument(
            "need at least one action count".into(),
        ));
    }
    if !beta.is_finite() || beta <= 0.0 {
        return Err(PredictError::InvalidArgument(format!(
            "beta must be finite and positive, got {beta}"
        )));
    }
    if !sigma.is_finite() {
        return Err(PredictError::InvalidArgument("sigma must be finite".into()));
    }
    if counts.contains(&0) {
        return Err(PredictError::NotYetExplored);
    }
    let total: usize = counts.iter().sum();
    let logs: Vec<f64> = counts
        .iter()
        .map(|&c| (c as f64 / total as f64).ln())
        .collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let shift = sigma / counts.len() as f64;
    Ok(logs.iter().map(|l| (l - mean) / beta + shift).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalReduction {
    /// Arithmetic mean of the per-step predictions.
    Average,
    /// One per-step prediction drawn uniformly at random.
    Sample,
    /// Indicator on the action most often best-responded to, ties toward
    /// the lowest index.
    BrMajority,
}

/// Collapse a per-step prediction trace into a single final prediction.
pub fn reduce_perstep_to_final(
    trace: &[RewardTable],
    mode: FinalReduction,
    rng: &mut impl Rng,
) -> Result<RewardTable, PredictError> {
    if trace.is_empty() {
        return Err(PredictError::InvalidArgument(
            "cannot reduce an empty trace".into(),
        ));
    }
    let n = trace[0].num_actions();
    if trace.iter().any(|r| r.num_actions() != n) {
        return Err(PredictError::InvalidArgument(
            "trace entries disagree on the action count".into(),
        ));
    }
    match mode {
        FinalReduction::Average => {
            let mut values = vec![0.0; n];
            for r in trace {
                for (v, x) in values.iter_mut().zip(&r.values) {
                    *v += x;
                }
            }
            for v in values.iter_mut() {
                *v /= trace.len() as f64;
            }
            RewardTable::new(values).map_err(|e| PredictError::InvalidArgument(e.to_string()))
        }
        FinalReduction::Sample => {
            let uniform = vec![1.0 / trace.len() as f64; trace.len()];
            Ok(trace[sample_index(&uniform, rng)].clone())
        }
        FinalReduction::BrMajority => {
            let mut votes = vec![0.0; n];
            for r in trace {
                votes[r.argmax()] += 1.0;
            }
            let winner = argmax_lowest(&votes);
            let mut values = vec![0.0; n];
            values[winner] = 1.0;
            RewardTable::with_sigma(values, Some(1.0))
                .map_err(|e| PredictError::InvalidArgument(e.to_string()))
        }
    }
}

/// Run a final-prediction procedure on every behavior prefix, yielding a
/// per-step trace: entry `t` is the final predictor applied to the first
/// `t - 1` steps.
pub fn reduce_final_to_perstep<F>(final_predictor: F, behavior: &Behavior) -> StatelessTrace
where
    F: Fn(&Behavior) -> RewardTable,
{
    let mut prefix = Behavior::new(behavior.num_states(), behavior.num_actions());
    let mut predictions = Vec::with_capacity(behavior.len());
    for &(s, a) in behavior.steps() {
        predictions.push(final_predictor(&prefix));
        prefix.push(s, a);
    }
    StatelessTrace {
        kind: PredictorKind::BestResponse,
        predictions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn best_response_tracks_previous_action() {
        let mut behavior = Behavior::new(1, 3);
        assert_eq!(best_response_stateless(&behavior).values, vec![1.0, 0.0, 0.0]);
        behavior.push(0, 2);
        assert_eq!(best_response_stateless(&behavior).values, vec![0.0, 0.0, 1.0]);
        behavior.push(0, 1);
        assert_eq!(best_response_stateless(&behavior).values, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn best_response_stateful_defaults_unvisited_states() {
        let mut behavior = Behavior::new(2, 2);
        behavior.push(1, 1);
        let q = best_response_stateful(&behavior);
        assert_eq!(q.row(0).unwrap(), &[1.0, 0.0]);
        assert_eq!(q.row(1).unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn averaging_matches_closed_form() {
        // Counts (2, 1, 1) with beta = 1, sigma = 0: frequencies
        // (1/2, 1/4, 1/4) give 2 ln 2 / 3 on the first action and
        // -ln 2 / 3 on the others.
        let r = averaging_predictor_stateless(&[2, 1, 1], 1.0, 0.0).unwrap();
        assert!((r.values[0] - 0.46209812037329684).abs() < 1e-15);
        assert!((r.values[1] + 0.23104906018664842).abs() < 1e-15);
        assert!((r.values[2] + 0.23104906018664842).abs() < 1e-15);
        assert!(r.values.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn averaging_recovers_boltzmann_frequencies_up_to_shift() {
        // If the counts are exactly proportional to a Boltzmann distribution
        // over R, inversion returns R itself when sigma matches its sum.
        let truth = [0.9, 0.3, 0.6];
        let beta = 2.0;
        let p = crate::env::boltzmann_policy(&truth, beta).unwrap();
        let scale = 1_000_000.0;
        let counts: Vec<usize> = p.probs.iter().map(|x| (x * scale) as usize).collect();
        let sigma: f64 = truth.iter().sum();
        let r = averaging_predictor_stateless(&counts, beta, sigma).unwrap();
        for (got, want) in r.values.iter().zip(&truth) {
            assert!((got - want).abs() < 1e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn averaging_requires_full_support() {
        match averaging_predictor_stateless(&[3, 0, 1], 1.0, 0.0) {
            Err(PredictError::NotYetExplored) => {}
            other => panic!("expected NotYetExplored, got {other:?}"),
        }
    }

    #[test]
    fn averaging_sigma_shifts_uniformly() {
        let base = averaging_predictor_stateless(&[5, 3], 2.0, 0.0).unwrap();
        let shifted = averaging_predictor_stateless(&[5, 3], 2.0, 3.0).unwrap();
        for (b, s) in base.values.iter().zip(&shifted.values) {
            assert!((s - b - 1.5).abs() < 1e-12);
        }
        assert!((shifted.values.iter().sum::<f64>() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn averaging_stateful_skips_unsupported_states() {
        let counts = vec![vec![1, 1], vec![4, 0]];
        let q = averaging_predictor_stateful(&counts, 1.0, &[0.0, 0.0]).unwrap();
        assert!(q.row(0).is_some());
        assert!(q.row(1).is_none());
    }

    #[test]
    fn reduce_average_of_constant_trace_is_identity() {
        let r = RewardTable::new(vec![0.2, 0.8]).unwrap();
        let trace = vec![r.clone(); 9];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let avg = reduce_perstep_to_final(&trace, FinalReduction::Average, &mut rng).unwrap();
        for (a, b) in avg.values.iter().zip(&r.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn reduce_majority_picks_most_frequent_argmax() {
        let mk = |values: Vec<f64>| RewardTable::new(values).unwrap();
        let trace = vec![
            mk(vec![1.0, 0.0]),
            mk(vec![0.0, 1.0]),
            mk(vec![0.3, 0.7]),
            mk(vec![0.1, 0.2]),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let final_pred =
            reduce_perstep_to_final(&trace, FinalReduction::BrMajority, &mut rng).unwrap();
        assert_eq!(final_pred.values, vec![0.0, 1.0]);
    }

    #[test]
    fn reduce_sample_is_deterministic_per_seed() {
        let mk = |values: Vec<f64>| RewardTable::new(values).unwrap();
        let trace: Vec<RewardTable> =
            (0..10).map(|i| mk(vec![i as f64, 0.0])).collect();
        let a = reduce_perstep_to_final(
            &trace,
            FinalReduction::Sample,
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        let b = reduce_perstep_to_final(
            &trace,
            FinalReduction::Sample,
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn final_to_perstep_feeds_growing_prefixes() {
        let mut behavior = Behavior::new(1, 2);
        behavior.push(0, 1);
        behavior.push(0, 0);
        behavior.push(0, 1);
        let trace = reduce_final_to_perstep(best_response_stateless, &behavior);
        assert_eq!(trace.predictions.len(), 3);
        assert_eq!(trace.predictions[0].values, vec![1.0, 0.0]);
        assert_eq!(trace.predictions[1].values, vec![0.0, 1.0]);
        assert_eq!(trace.predictions[2].values, vec![1.0, 0.0]);
    }
}
