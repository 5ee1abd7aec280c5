//! Experiment harness: deterministic simulation runs, parallel seed sweeps,
//! and the white-box trajectory data the verification suites consume.
//!
//! A run is reproducible from `(condition hash, seed)` alone. The learner
//! and the environment draw from separate streams, so changing one side of
//! the interaction never perturbs the other's randomness.

pub mod config;
pub mod oracle;
pub mod record;
pub mod rng;
pub mod verify;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::{concentration_radius, FGuarantee, StatefulSeries, StatelessSeries};
use crate::env::{
    boltzmann_policy, optimal_prefix_returns, sample_index, sample_initial, sample_transition,
    solve_q_star, EnvError, Environment, ForwardFlow, PolicyDist, QTable, RewardTable,
};
use crate::learners::{
    measured_policy_regret, measured_regret_stateless, InteractionHistory, Learner, LearnerError,
    LearnerModel, Truth,
};
use crate::measures::{
    greedy_policy_step, kl_divergence, norm_distance_stateless, step_br_stateless,
    step_klbp_stateful, step_norm_stateful, NormKind, WeightingScheme,
};
use crate::predictors::{
    averaging_predictor_stateful, averaging_predictor_stateless, best_response_stateful,
    best_response_stateless, PredictError, PredictorKind, QEstimate,
};
use config::{ConfigError, MeasureKind, ResolvedExperiment};
use record::{RecordError, RunRecord, RunSummary, StepRow};
use rng::{derive_rng, StreamRole};

/// Tolerance on the Bellman residual when solving for the optimal Q table.
pub const Q_STAR_TOL: f64 = 1e-10;

const Q_STAR_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// Everything a verifier may inspect about one run beyond the public record:
/// the learner's true per-step policies, the kappa floor series, visit
/// counts, the full prediction trace, and the solved ground truth.
#[derive(Debug)]
pub struct WhiteBox {
    /// Policy of the learner at every step for every state, `[t-1][s]`.
    pub policies: Vec<Vec<PolicyDist>>,
    /// `min_a min(p_t(a|s), p*(a|s))` where defined, `[t-1][s]`.
    pub kappa: Vec<Vec<Option<f64>>>,
    /// Visits to each state strictly before each step, `[t-1][s]`.
    pub visits_before: Vec<Vec<usize>>,
    /// First step with full action support per state.
    pub explored_from: Vec<Option<usize>>,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub stateless_trace: Option<Vec<RewardTable>>,
    pub stateful_trace: Option<Vec<QEstimate>>,
    pub truth_reward: Option<RewardTable>,
    pub truth_q: Option<QTable>,
    /// Rationality coefficient the recovery theory runs at: the learner's
    /// own beta when it is Boltzmann, otherwise the predictor's.
    pub bound_beta: Option<f64>,
    pub history: InteractionHistory,
}

impl WhiteBox {
    /// Kappa and exploration data shaped for the stateless recovery bound.
    /// `None` when full support was never reached.
    pub fn stateless_bound_series(&self) -> Option<StatelessSeries> {
        let explored_from = self.explored_from.first().copied().flatten()?;
        let kappa = self.kappa.iter().map(|row| row[0]).collect();
        Some(StatelessSeries {
            explored_from,
            kappa,
        })
    }

    /// The stateful analog; states that never reached full support stay
    /// `None` and are skipped by the bound.
    pub fn stateful_bound_series(&self) -> StatefulSeries {
        StatefulSeries {
            explored_from: self.explored_from.clone(),
            kappa: self.kappa.clone(),
            visits_before: self.visits_before.clone(),
        }
    }

    /// Single-state policy sequence of a stateless run.
    pub fn flat_policies(&self) -> Vec<PolicyDist> {
        self.policies.iter().map(|step| step[0].clone()).collect()
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub record: RunRecord,
    pub whitebox: WhiteBox,
}

/// Simulate one interaction and measure the predictor along the way.
///
/// Stream discipline per step: the learner stream is drawn for estimate
/// synthesis and then for action sampling; the environment stream is drawn
/// once for the initial state and once per transition. Predictions and
/// measures consume no randomness at all.
pub fn run_experiment(resolved: &ResolvedExperiment, seed: u64) -> Result<RunOutput, RunError> {
    let start = Instant::now();
    let config = &resolved.config;
    let horizon = config.horizon;
    let num_states = resolved.environment.num_states();
    let num_actions = resolved.environment.num_actions();
    let stateful = resolved.environment.is_stateful();

    let model = config.learner.build_model()?;
    let sigma_vec = config.predictor.sigma_vector(num_states);

    let truth_q: Option<QTable> = match &resolved.environment {
        Environment::Mdp(mdp) => Some(solve_q_star(mdp, Q_STAR_TOL, Q_STAR_MAX_ITER)?),
        Environment::Bandit(_) => None,
    };
    let truth_reward: Option<RewardTable> = match &resolved.environment {
        Environment::Bandit(r) => Some(r.clone()),
        Environment::Mdp(_) => None,
    };
    let truth = match (&truth_reward, &truth_q) {
        (Some(r), None) => Truth::Reward(r),
        (None, Some(q)) => Truth::Q(q),
        _ => unreachable!("exactly one truth representation"),
    };

    let bound_beta = match &model {
        LearnerModel::BoltzmannSynthesized { beta, .. } => Some(*beta),
        _ => config.predictor.beta,
    };
    let klbp_beta = bound_beta.unwrap_or(1.0);
    let p_star: Option<Vec<PolicyDist>> = match bound_beta {
        Some(beta) => Some(
            (0..num_states)
                .map(|s| boltzmann_policy(truth.row(s), beta))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    let klbp_truth = boltzmann_policy(truth.row(0), klbp_beta)?;

    let want = |m: MeasureKind| config.measures.contains(&m);
    let want_br = want(MeasureKind::Br);
    let want_klbp = want(MeasureKind::Klbp);
    let want_l2 = want(MeasureKind::L2);
    let want_linf = want(MeasureKind::Linf);
    let weighting = WeightingScheme::SqrtVisitFrequency;

    let f_prefix: Option<Vec<f64>> = match &model {
        LearnerModel::BoltzmannSynthesized { schedule, .. } => {
            Some(FGuarantee::Schedule(*schedule).prefix(horizon))
        }
        _ => None,
    };

    let mut learner = Learner::new(model, &truth, horizon)?;
    let mut rng_learner = derive_rng(&resolved.hash, seed, StreamRole::Learner);
    let mut rng_env = derive_rng(&resolved.hash, seed, StreamRole::Environment);

    let mut history = InteractionHistory::new(num_states, num_actions);
    let mut current_state = match &resolved.environment {
        Environment::Bandit(_) => 0,
        Environment::Mdp(mdp) => sample_initial(mdp, &mut rng_env),
    };

    let (opt_prefix, mut br_flow) = match (&resolved.environment, want_br) {
        (Environment::Mdp(mdp), true) => (
            Some(optimal_prefix_returns(mdp, horizon)),
            Some(ForwardFlow::new(mdp)),
        ),
        _ => (None, None),
    };
    let mut greedy_return = 0.0;

    let mut cum_br = 0.0;
    let mut cum_klbp = 0.0;
    let mut cum_l2 = 0.0;
    let mut cum_linf = 0.0;

    let mut rows = Vec::with_capacity(horizon);
    let mut wb_policies: Vec<Vec<PolicyDist>> = Vec::with_capacity(horizon);
    let mut wb_kappa = Vec::with_capacity(horizon);
    let mut wb_visits = Vec::with_capacity(horizon);
    let mut wb_states = Vec::with_capacity(horizon);
    let mut wb_actions = Vec::with_capacity(horizon);
    let mut trace_stateless: Option<Vec<RewardTable>> = (!stateful).then(Vec::new);
    let mut trace_stateful: Option<Vec<QEstimate>> = stateful.then(Vec::new);

    for t in 1..=horizon {
        let behavior = history.behavior();
        let visits_before: Vec<usize> =
            (0..num_states).map(|s| behavior.state_count(s)).collect();
        let explored: Vec<Option<usize>> = (0..num_states)
            .map(|s| behavior.exploration_time(s))
            .collect();

        let kappa_row: Vec<Option<f64>> = (0..num_states)
            .map(|s| {
                let p_star = p_star.as_ref()?;
                if t < 2 {
                    return None;
                }
                let total = behavior.state_count(s);
                if total == 0 {
                    return None;
                }
                let counts = behavior.action_counts(s);
                if counts.contains(&0) {
                    return None;
                }
                let mut kappa = f64::INFINITY;
                for (a, &c) in counts.iter().enumerate() {
                    let freq = c as f64 / total as f64;
                    kappa = kappa.min(freq).min(p_star[s].probs[a]);
                }
                Some(kappa)
            })
            .collect();

        let mut pred_table: Option<RewardTable> = None;
        let mut pred_rows: Option<QEstimate> = None;
        if stateful {
            let q = match config.predictor.predictor {
                PredictorKind::BestResponse => best_response_stateful(behavior),
                PredictorKind::ConstantZero => QEstimate {
                    rows: vec![Some(vec![0.0; num_actions]); num_states],
                },
                PredictorKind::Averaging => {
                    let counts: Vec<Vec<usize>> = (0..num_states)
                        .map(|s| behavior.action_counts(s).to_vec())
                        .collect();
                    averaging_predictor_stateful(
                        &counts,
                        config.predictor.beta.expect("validated beta"),
                        &sigma_vec,
                    )?
                }
            };
            pred_rows = Some(q);
        } else {
            let r = match config.predictor.predictor {
                PredictorKind::BestResponse => best_response_stateless(behavior),
                PredictorKind::ConstantZero => RewardTable {
                    values: vec![0.0; num_actions],
                    sigma: Some(0.0),
                },
                PredictorKind::Averaging => {
                    let beta = config.predictor.beta.expect("validated beta");
                    match averaging_predictor_stateless(
                        behavior.action_counts(0),
                        beta,
                        sigma_vec[0],
                    ) {
                        Ok(table) => table,
                        // Before full support the inversion is undefined;
                        // report the flat table with the declared sum.
                        Err(PredictError::NotYetExplored) => RewardTable {
                            values: vec![sigma_vec[0] / num_actions as f64; num_actions],
                            sigma: Some(sigma_vec[0]),
                        },
                        Err(e) => return Err(e.into()),
                    }
                }
            };
            pred_table = Some(r);
        }

        let mut br_inc = None;
        let mut klbp_inc = None;
        let mut l2_inc = None;
        let mut linf_inc = None;
        if let Some(pred) = &pred_table {
            let truth_table = truth_reward.as_ref().expect("stateless truth");
            if want_br {
                let inc = step_br_stateless(truth_table, pred);
                cum_br += inc;
                br_inc = Some(inc);
            }
            if want_klbp {
                let p = boltzmann_policy(&pred.values, klbp_beta)?;
                let inc = kl_divergence(&p.probs, &klbp_truth.probs);
                cum_klbp += inc;
                klbp_inc = Some(inc);
            }
            if want_l2 {
                let inc =
                    norm_distance_stateless(truth_table, std::slice::from_ref(pred), NormKind::L2);
                cum_l2 += inc;
                l2_inc = Some(inc);
            }
            if want_linf {
                let inc = norm_distance_stateless(
                    truth_table,
                    std::slice::from_ref(pred),
                    NormKind::Linf,
                );
                cum_linf += inc;
                linf_inc = Some(inc);
            }
        }
        if let Some(pred) = &pred_rows {
            let Environment::Mdp(mdp) = &resolved.environment else {
                unreachable!("stateful prediction implies an MDP");
            };
            let tq = truth_q.as_ref().expect("stateful truth");
            if want_br {
                let greedy = greedy_policy_step(pred, num_actions);
                let gained = br_flow
                    .as_mut()
                    .expect("flow initialized with the measure")
                    .step(mdp, |s, a| greedy[s].probs[a]);
                greedy_return += gained;
                let cum_now = opt_prefix.as_ref().expect("prefix returns")[t - 1] - greedy_return;
                br_inc = Some(cum_now - cum_br);
                cum_br = cum_now;
            }
            if want_klbp {
                let inc =
                    step_klbp_stateful(tq, pred, klbp_beta, &weighting, t, &visits_before);
                cum_klbp += inc;
                klbp_inc = Some(inc);
            }
            if want_l2 {
                let inc = step_norm_stateful(
                    tq,
                    pred,
                    NormKind::L2,
                    &weighting,
                    t,
                    &visits_before,
                    &explored,
                );
                cum_l2 += inc;
                l2_inc = Some(inc);
            }
            if want_linf {
                let inc = step_norm_stateful(
                    tq,
                    pred,
                    NormKind::Linf,
                    &weighting,
                    t,
                    &visits_before,
                    &explored,
                );
                cum_linf += inc;
                linf_inc = Some(inc);
            }
        }

        let radius =
            concentration_radius(t, num_actions, num_states, horizon, config.epsilon).ok();
        let f_term = match (&f_prefix, kappa_row[current_state]) {
            (Some(f), Some(kappa)) => {
                let steps = (t - 1) as f64;
                let value = if stateful {
                    let visits = visits_before[current_state];
                    f[visits] / ((steps * visits as f64).sqrt() * kappa)
                } else {
                    f[t - 1] / (steps * kappa)
                };
                Some(value)
            }
            _ => None,
        };

        let estimates = learner.synthesize_step(behavior, &truth, t, &mut rng_learner);
        let policies = learner.policy_matrix(estimates.as_deref(), t);
        let action = sample_index(&policies[current_state].probs, &mut rng_learner);
        let prob = policies[current_state].probs[action];
        let reward = match &resolved.environment {
            Environment::Bandit(r) => r.values[action],
            Environment::Mdp(m) => m.reward(current_state, action),
        };
        learner.observe(current_state, action, reward, prob);
        history.push(current_state, action, reward);

        rows.push(StepRow {
            t,
            state: current_state,
            action,
            br_inc,
            br_cum: want_br.then_some(cum_br),
            klbp_inc,
            klbp_cum: want_klbp.then_some(cum_klbp),
            l2_inc,
            l2_cum: want_l2.then_some(cum_l2),
            linf_inc,
            linf_cum: want_linf.then_some(cum_linf),
            kappa: kappa_row[current_state],
            radius,
            f_term,
        });
        wb_states.push(current_state);
        wb_actions.push(action);
        wb_kappa.push(kappa_row);
        wb_visits.push(visits_before);
        wb_policies.push(policies);
        if let Some(trace) = trace_stateless.as_mut() {
            trace.push(pred_table.expect("stateless prediction"));
        }
        if let Some(trace) = trace_stateful.as_mut() {
            trace.push(pred_rows.expect("stateful prediction"));
        }

        if let Environment::Mdp(mdp) = &resolved.environment {
            current_state = sample_transition(mdp, current_state, action, &mut rng_env);
        }
    }

    let explored_from: Vec<Option<usize>> = (0..num_states)
        .map(|s| history.behavior().exploration_time(s))
        .collect();

    let mut final_measures = BTreeMap::new();
    for m in &config.measures {
        let value = match m {
            MeasureKind::Br => cum_br,
            MeasureKind::Klbp => cum_klbp,
            MeasureKind::L2 => cum_l2,
            MeasureKind::Linf => cum_linf,
        };
        final_measures.insert(m.name().to_string(), value);
    }

    let measured_regret = match &resolved.environment {
        Environment::Bandit(r) => measured_regret_stateless(&history, r),
        Environment::Mdp(mdp) => measured_policy_regret(&wb_policies, mdp, horizon)?,
    };

    let summary = RunSummary {
        config_hash: resolved.hash.clone(),
        seed,
        horizon,
        stateful,
        exploration_time: if stateful { None } else { explored_from[0] },
        exploration_time_per_state: stateful.then(|| explored_from.clone()),
        final_measures,
        measured_regret,
        wall_time_s: start.elapsed().as_secs_f64(),
    };

    Ok(RunOutput {
        record: RunRecord { rows, summary },
        whitebox: WhiteBox {
            policies: wb_policies,
            kappa: wb_kappa,
            visits_before: wb_visits,
            explored_from,
            states: wb_states,
            actions: wb_actions,
            stateless_trace: trace_stateless,
            stateful_trace: trace_stateful,
            truth_reward,
            truth_q,
            bound_beta,
            history,
        },
    })
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub seed: u64,
    pub outcome: Result<RunSummary, String>,
}

/// Run every seed of a condition, optionally on a bounded thread pool.
/// Entries come back in seed order regardless of scheduling.
pub fn sweep(resolved: &ResolvedExperiment, seeds: &[u64], jobs: Option<usize>) -> Vec<SweepEntry> {
    run_parallel(jobs, || {
        seeds
            .par_iter()
            .map(|&seed| SweepEntry {
                seed,
                outcome: run_experiment(resolved, seed)
                    .map(|out| out.record.summary)
                    .map_err(|e| e.to_string()),
            })
            .collect()
    })
}

/// Like [`sweep`], but also writes each run under
/// `<out_root>/<condition hash>/seed-<seed>/`.
pub fn sweep_to_dir(
    resolved: &ResolvedExperiment,
    seeds: &[u64],
    jobs: Option<usize>,
    out_root: &Path,
) -> Vec<SweepEntry> {
    run_parallel(jobs, || {
        seeds
            .par_iter()
            .map(|&seed| SweepEntry {
                seed,
                outcome: run_and_write(resolved, seed, out_root)
                    .map(|(out, _)| out.record.summary)
                    .map_err(|e| e.to_string()),
            })
            .collect()
    })
}

fn run_parallel<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("worker pool")
            .install(work),
        _ => work(),
    }
}

pub fn run_dir(out_root: &Path, hash: &str, seed: u64) -> PathBuf {
    out_root.join(hash).join(format!("seed-{seed}"))
}

/// Run one seed and persist its record, returning the output and the
/// directory it landed in.
pub fn run_and_write(
    resolved: &ResolvedExperiment,
    seed: u64,
    out_root: &Path,
) -> Result<(RunOutput, PathBuf), RunError> {
    let output = run_experiment(resolved, seed)?;
    let dir = run_dir(out_root, &resolved.hash, seed);
    std::fs::create_dir_all(&dir).map_err(RecordError::from)?;
    output.record.write_to(&dir)?;
    Ok((output, dir))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Behavior;
    use crate::measures::{d_br_stateless, d_klbp_stateful, norm_distance_stateful};
    use std::path::Path;

    fn resolve(text: &str) -> ResolvedExperiment {
        let config: config::ExperimentConfig = serde_json::from_str(text).unwrap();
        config.resolve(Path::new(".")).unwrap()
    }

    fn boltzmann_bandit(horizon: usize) -> ResolvedExperiment {
        resolve(&format!(
            r#"{{
                "environment": {{"reward": [0.3, 0.85, 0.55]}},
                "learner": {{"kind": "boltzmann-synthesized", "beta": 2.0,
                            "c": 1.0, "alpha": 0.5,
                            "noise_mode": "random-direction"}},
                "predictor": {{"predictor": "averaging", "beta": 2.0, "sigma": 1.7}},
                "horizon": {horizon},
                "seeds": [0]
            }}"#
        ))
    }

    fn chain_mdp(horizon: usize) -> ResolvedExperiment {
        resolve(&format!(
            r#"{{
                "environment": {{
                    "num_states": 4,
                    "num_actions": 2,
                    "transition": [
                        [[0.1, 0.75, 0.1, 0.05], [0.55, 0.2, 0.2, 0.05]],
                        [[0.3, 0.05, 0.6, 0.05], [0.1, 0.65, 0.2, 0.05]],
                        [[0.5, 0.25, 0.2, 0.05], [0.2, 0.15, 0.6, 0.05]],
                        [[0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 0.0, 1.0]]
                    ],
                    "initial_dist": [1.0, 0.0, 0.0, 0.0],
                    "terminals": [3],
                    "reward": [[0.9, 0.2], [0.4, 0.7], [0.1, 0.6], [0.0, 0.0]]
                }},
                "learner": {{"kind": "boltzmann-synthesized", "beta": 2.0,
                            "c": 1.0, "alpha": 0.5,
                            "noise_mode": "random-direction"}},
                "predictor": {{"predictor": "averaging", "beta": 2.0,
                              "sigma": [1.1, 1.1, 0.7, 0.0]}},
                "horizon": {horizon},
                "seeds": [0]
            }}"#
        ))
    }

    #[test]
    fn identical_seeds_reproduce_the_run_exactly() {
        let resolved = boltzmann_bandit(150);
        let a = run_experiment(&resolved, 7).unwrap();
        let b = run_experiment(&resolved, 7).unwrap();
        assert_eq!(a.record.rows, b.record.rows);
        assert_eq!(a.whitebox.actions, b.whitebox.actions);
        assert_eq!(
            a.record.summary.final_measures,
            b.record.summary.final_measures
        );
    }

    #[test]
    fn different_seeds_give_different_trajectories() {
        let resolved = boltzmann_bandit(150);
        let a = run_experiment(&resolved, 0).unwrap();
        let b = run_experiment(&resolved, 1).unwrap();
        assert_ne!(a.whitebox.actions, b.whitebox.actions);
    }

    #[test]
    fn measure_columns_follow_the_request() {
        let resolved = resolve(
            r#"{
                "environment": {"reward": [0.3, 0.85, 0.55]},
                "learner": {"kind": "explore-then-commit"},
                "predictor": {"predictor": "best-response"},
                "measures": ["br"],
                "horizon": 30,
                "seeds": [0]
            }"#,
        );
        let out = run_experiment(&resolved, 3).unwrap();
        for row in &out.record.rows {
            assert!(row.br_inc.is_some() && row.br_cum.is_some());
            assert!(row.klbp_inc.is_none() && row.l2_cum.is_none());
        }
        assert_eq!(
            out.record.summary.final_measures.keys().collect::<Vec<_>>(),
            vec!["br"]
        );
    }

    #[test]
    fn cumulative_columns_are_running_sums_of_increments() {
        let resolved = boltzmann_bandit(200);
        let out = run_experiment(&resolved, 11).unwrap();
        let mut sums = [0.0_f64; 4];
        for row in &out.record.rows {
            sums[0] += row.br_inc.unwrap();
            sums[1] += row.klbp_inc.unwrap();
            sums[2] += row.l2_inc.unwrap();
            sums[3] += row.linf_inc.unwrap();
            assert!((sums[0] - row.br_cum.unwrap()).abs() < 1e-9);
            assert!((sums[1] - row.klbp_cum.unwrap()).abs() < 1e-9);
            assert!((sums[2] - row.l2_cum.unwrap()).abs() < 1e-9);
            assert!((sums[3] - row.linf_cum.unwrap()).abs() < 1e-9);
        }
        let summary = &out.record.summary;
        assert!((summary.final_measures["linf"] - sums[3]).abs() < 1e-9);
        assert!(summary.exploration_time.is_some());
    }

    #[test]
    fn stateless_br_cum_matches_the_batch_measure() {
        let resolved = resolve(
            r#"{
                "environment": {"reward": [0.3, 0.85, 0.55]},
                "learner": {"kind": "exponential-weights"},
                "predictor": {"predictor": "best-response"},
                "measures": ["br"],
                "horizon": 120,
                "seeds": [0]
            }"#,
        );
        let out = run_experiment(&resolved, 5).unwrap();
        let trace = out.whitebox.stateless_trace.as_ref().unwrap();
        let truth = out.whitebox.truth_reward.as_ref().unwrap();
        let batch = d_br_stateless(truth, trace);
        let streamed = out.record.summary.final_measures["br"];
        assert!((batch - streamed).abs() < 1e-12);
    }

    #[test]
    fn stateful_cums_match_offline_recomputation() {
        let resolved = chain_mdp(400);
        let out = run_experiment(&resolved, 2).unwrap();
        let trace = out.whitebox.stateful_trace.as_ref().unwrap();
        let truth = out.whitebox.truth_q.as_ref().unwrap();
        let series = out.whitebox.history.behavior().visit_series();
        let weighting = WeightingScheme::SqrtVisitFrequency;
        let l2 = norm_distance_stateful(truth, trace, NormKind::L2, &weighting, &series);
        let linf = norm_distance_stateful(truth, trace, NormKind::Linf, &weighting, &series);
        let klbp = d_klbp_stateful(truth, trace, 2.0, &weighting, &series);
        let summary = &out.record.summary;
        assert!((l2 - summary.final_measures["l2"]).abs() < 1e-9);
        assert!((linf - summary.final_measures["linf"]).abs() < 1e-9);
        assert!((klbp - summary.final_measures["klbp"]).abs() < 1e-9);
        assert!(summary.stateful);
        assert_eq!(
            summary.exploration_time_per_state.as_ref().unwrap().len(),
            4
        );
        assert!(summary.measured_regret > -1e-9);
    }

    #[test]
    fn kappa_appears_only_with_full_support_and_bounds_the_floor() {
        let resolved = boltzmann_bandit(300);
        let out = run_experiment(&resolved, 4).unwrap();
        let te = out.whitebox.explored_from[0].unwrap();
        for (i, row) in out.record.rows.iter().enumerate() {
            let t = i + 1;
            if t < te {
                assert!(row.kappa.is_none(), "kappa leaked at t={t} before te={te}");
            } else {
                let kappa = row.kappa.unwrap();
                assert!(kappa > 0.0 && kappa <= 1.0 / 3.0 + 1e-12);
                assert!(row.f_term.unwrap() > 0.0);
            }
            if t >= 2 {
                assert!(row.radius.unwrap() > 0.0);
            } else {
                assert!(row.radius.is_none());
            }
        }
    }

    #[test]
    fn visit_snapshots_match_a_replayed_behavior() {
        let resolved = chain_mdp(120);
        let out = run_experiment(&resolved, 9).unwrap();
        let mut replay = Behavior::new(4, 2);
        for (i, (&s, &a)) in out
            .whitebox
            .states
            .iter()
            .zip(&out.whitebox.actions)
            .enumerate()
        {
            let want: Vec<usize> = (0..4).map(|x| replay.state_count(x)).collect();
            assert_eq!(out.whitebox.visits_before[i], want);
            replay.push(s, a);
        }
        assert_eq!(
            out.whitebox.explored_from,
            (0..4).map(|s| replay.exploration_time(s)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn sweep_preserves_seed_order_and_matches_single_runs() {
        let resolved = boltzmann_bandit(80);
        let seeds = [3_u64, 1, 4, 1, 5];
        let entries = sweep(&resolved, &seeds, Some(2));
        assert_eq!(
            entries.iter().map(|e| e.seed).collect::<Vec<_>>(),
            seeds.to_vec()
        );
        for entry in &entries {
            let single = run_experiment(&resolved, entry.seed).unwrap();
            let swept = entry.outcome.as_ref().unwrap();
            assert_eq!(swept.final_measures, single.record.summary.final_measures);
            assert_eq!(swept.seed, single.record.summary.seed);
        }
    }

    #[test]
    fn run_and_write_round_trips_through_disk() {
        let resolved = boltzmann_bandit(40);
        let dir = tempfile::tempdir().unwrap();
        let (output, run_path) = run_and_write(&resolved, 6, dir.path()).unwrap();
        assert!(run_path.ends_with(format!("{}/seed-6", resolved.hash)));
        let read = RunRecord::read_from(&run_path).unwrap();
        assert_eq!(read.rows, output.record.rows);
        assert_eq!(read.summary.final_measures, output.record.summary.final_measures);
    }
}
