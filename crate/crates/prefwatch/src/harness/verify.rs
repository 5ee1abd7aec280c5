//! The certification suite. Every guarantee the toolkit ships is re-checked
//! here at desk scale: simulated interactions are measured against the
//! analytic bounds, impossibility floors are witnessed deterministically,
//! and the proof machinery is hammered with random trials. Each check
//! reports what it measured and what the bound was; nothing is clamped or
//! rounded in the checked direction, and bounds that are out of domain for
//! the requested options come back as not-applicable records instead of
//! numbers.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    adversarial_l2_lower_bound, adversarial_pair, adversarial_pair_gap, azuma_event_holds,
    concentration_radius, kl_to_br_perstep_bound, linfty_bound, BoundInputs, BoundSeries,
    FGuarantee, StatelessSeries,
};
use crate::env::{
    boltzmann_policy, expected_policy_return, finite_horizon_optimal_return, solve_q_star,
    BanditSpec, Environment, EnvironmentDef, MdpSpec, PolicyDist, RewardTable,
};
use crate::learners::{EstimateSchedule, NoiseMode};
use crate::measures::{
    d_br_stateless, greedy_policy_step, kl_divergence, norm_distance_stateless, tv_distance,
    NormKind,
};
use crate::predictors::{
    averaging_predictor_stateless, reduce_perstep_to_final, FinalReduction, PredictorKind,
    QEstimate,
};

use super::config::{
    EnvironmentSource, ExperimentConfig, LearnerKind, LearnerSpec, MeasureKind, PredictorSpec,
    ResolvedExperiment, SeedSpec, SigmaSpec,
};
use super::oracle;
use super::{run_experiment, Q_STAR_MAX_ITER, Q_STAR_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

/// One line of the verification report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub status: CheckStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    pub seeds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl CheckRecord {
    /// Passes when `measured <= bound`. NaN anywhere fails.
    fn upper(name: &str, measured: f64, bound: f64, seeds: usize, epsilon: Option<f64>) -> Self {
        let status = if measured <= bound {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        CheckRecord {
            name: name.to_string(),
            status,
            measured: Some(measured),
            bound: Some(bound),
            seeds,
            epsilon,
        }
    }

    /// Passes when `measured >= bound`. NaN anywhere fails.
    fn lower(name: &str, measured: f64, bound: f64, seeds: usize, epsilon: Option<f64>) -> Self {
        let status = if measured >= bound {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        CheckRecord {
            name: name.to_string(),
            status,
            measured: Some(measured),
            bound: Some(bound),
            seeds,
            epsilon,
        }
    }

    fn not_applicable(name: &str, seeds: usize, epsilon: Option<f64>) -> Self {
        CheckRecord {
            name: name.to_string(),
            status: CheckStatus::NotApplicable,
            measured: None,
            bound: None,
            seeds,
            epsilon,
        }
    }

    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<CheckRecord>,
    pub wall_time_s: f64,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckRecord::passed)
    }
}

/// Knobs a caller may override; every check has its own defaults.
#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub epsilon: Option<f64>,
    pub seeds: Option<usize>,
}

impl VerifyOptions {
    fn epsilon_or(&self, default: f64) -> f64 {
        self.epsilon.unwrap_or(default)
    }

    fn seeds_or(&self, default: usize) -> usize {
        self.seeds.unwrap_or(default)
    }
}

fn bare_learner(kind: LearnerKind) -> LearnerSpec {
    LearnerSpec {
        kind,
        beta: None,
        c: None,
        alpha: None,
        noise_mode: None,
        fixed_action: None,
        eta: None,
    }
}

fn boltzmann_learner() -> LearnerSpec {
    let mut spec = bare_learner(LearnerKind::BoltzmannSynthesized);
    spec.beta = Some(2.0);
    spec.c = Some(1.0);
    spec.alpha = Some(0.5);
    spec.noise_mode = Some(NoiseMode::RandomDirection);
    spec
}

/// One representative of every learner kind, each with its own parameters.
fn all_learner_specs() -> Vec<LearnerSpec> {
    let mut constant = bare_learner(LearnerKind::ConstantAction);
    constant.fixed_action = Some(0);
    let mut mixed = bare_learner(LearnerKind::EpsilonMixedOptimal);
    mixed.alpha = Some(0.5);
    vec![
        constant,
        bare_learner(LearnerKind::ExploreThenCommit),
        bare_learner(LearnerKind::ExponentialWeights),
        boltzmann_learner(),
        mixed,
    ]
}

fn best_response_pred() -> PredictorSpec {
    PredictorSpec {
        predictor: PredictorKind::BestResponse,
        beta: None,
        sigma: None,
    }
}

fn constant_zero_pred() -> PredictorSpec {
    PredictorSpec {
        predictor: PredictorKind::ConstantZero,
        beta: None,
        sigma: None,
    }
}

fn averaging_pred(beta: f64, sigma: SigmaSpec) -> PredictorSpec {
    PredictorSpec {
        predictor: PredictorKind::Averaging,
        beta: Some(beta),
        sigma: Some(sigma),
    }
}

fn resolve_inline(
    environment: EnvironmentDef,
    learner: LearnerSpec,
    predictor: PredictorSpec,
    measures: Vec<MeasureKind>,
    horizon: usize,
    epsilon: f64,
) -> ResolvedExperiment {
    let config = ExperimentConfig {
        environment: EnvironmentSource::Inline(environment),
        learner,
        predictor,
        measures,
        horizon,
        seeds: SeedSpec::Range { count: 1, base: 0 },
        epsilon,
        out_dir: None,
    };
    config
        .resolve(Path::new("."))
        .expect("verification fixtures are well formed")
}

fn bandit(reward: Vec<f64>, sigma: f64) -> EnvironmentDef {
    EnvironmentDef::Bandit(BanditSpec {
        reward,
        num_actions: None,
        sigma: Some(sigma),
    })
}

/// Three transient states wandering under action-dependent drift, with a
/// fixed 8% chance of termination on every step.
fn drift_mdp() -> MdpSpec {
    MdpSpec {
        num_states: 4,
        num_actions: 3,
        transition: vec![
            vec![
                vec![0.12, 0.60, 0.20, 0.08],
                vec![0.12, 0.20, 0.60, 0.08],
                vec![0.52, 0.20, 0.20, 0.08],
            ],
            vec![
                vec![0.60, 0.12, 0.20, 0.08],
                vec![0.20, 0.52, 0.20, 0.08],
                vec![0.20, 0.12, 0.60, 0.08],
            ],
            vec![
                vec![0.60, 0.20, 0.12, 0.08],
                vec![0.20, 0.60, 0.12, 0.08],
                vec![0.20, 0.20, 0.52, 0.08],
            ],
            vec![
                vec![0.0, 0.0, 0.0, 1.0],
                vec![0.0, 0.0, 0.0, 1.0],
                vec![0.0, 0.0, 0.0, 1.0],
            ],
        ],
        initial_dist: vec![1.0, 0.0, 0.0, 0.0],
        terminals: vec![3],
        reward: vec![
            vec![0.70, 0.45, 0.30],
            vec![0.35, 0.60, 0.50],
            vec![0.55, 0.25, 0.65],
            vec![0.0, 0.0, 0.0],
        ],
        sigma: None,
    }
}

/// A four-state ring where one action advances and the other lingers; both
/// leak 10% to the terminal each step.
fn ring_mdp() -> MdpSpec {
    let row = |stay: usize, next: usize, stay_mass: f64, next_mass: f64| {
        let mut probs = vec![0.0; 5];
        probs[stay] = stay_mass;
        probs[next] = next_mass;
        probs[4] = 0.10;
        probs
    };
    let mut transition = Vec::new();
    for s in 0..4usize {
        let next = (s + 1) % 4;
        transition.push(vec![row(s, next, 0.20, 0.70), row(s, next, 0.70, 0.20)]);
    }
    transition.push(vec![
        vec![0.0, 0.0, 0.0, 0.0, 1.0],
        vec![0.0, 0.0, 0.0, 0.0, 1.0],
    ]);
    MdpSpec {
        num_states: 5,
        num_actions: 2,
        transition,
        initial_dist: vec![0.25, 0.25, 0.25, 0.25, 0.0],
        terminals: vec![4],
        reward: vec![
            vec![0.80, 0.60],
            vec![0.30, 0.50],
            vec![0.60, 0.40],
            vec![0.45, 0.70],
            vec![0.0, 0.0],
        ],
        sigma: None,
    }
}

/// Two transient states that drain into the terminal in a couple of steps;
/// four actions reshuffle where the surviving mass goes.
fn funnel_mdp() -> MdpSpec {
    MdpSpec {
        num_states: 3,
        num_actions: 4,
        transition: vec![
            vec![
                vec![0.30, 0.20, 0.50],
                vec![0.20, 0.30, 0.50],
                vec![0.40, 0.10, 0.50],
                vec![0.10, 0.40, 0.50],
            ],
            vec![
                vec![0.25, 0.25, 0.50],
                vec![0.35, 0.15, 0.50],
                vec![0.15, 0.35, 0.50],
                vec![0.05, 0.45, 0.50],
            ],
            vec![
                vec![0.0, 0.0, 1.0],
                vec![0.0, 0.0, 1.0],
                vec![0.0, 0.0, 1.0],
                vec![0.0, 0.0, 1.0],
            ],
        ],
        initial_dist: vec![0.6, 0.4, 0.0],
        terminals: vec![2],
        reward: vec![
            vec![0.90, 0.30, 0.60, 0.15],
            vec![0.20, 0.75, 0.50, 0.40],
            vec![0.0, 0.0, 0.0, 0.0],
        ],
        sigma: None,
    }
}

/// A slow-draining three-plus-terminal MDP for the recovery-bound runs:
/// 1% termination per step leaves around a hundred transient visits, enough
/// for every state to reach full action support.
fn recovery_mdp() -> MdpSpec {
    MdpSpec {
        num_states: 4,
        num_actions: 3,
        transition: vec![
            vec![
                vec![0.49, 0.30, 0.20, 0.01],
                vec![0.30, 0.49, 0.20, 0.01],
                vec![0.30, 0.20, 0.49, 0.01],
            ],
            vec![
                vec![0.44, 0.35, 0.20, 0.01],
                vec![0.20, 0.49, 0.30, 0.01],
                vec![0.35, 0.20, 0.44, 0.01],
            ],
            vec![
                vec![0.49, 0.25, 0.25, 0.01],
                vec![0.25, 0.49, 0.25, 0.01],
                vec![0.25, 0.25, 0.49, 0.01],
            ],
            vec![
                vec![0.0, 0.0, 0.0, 1.0],
                vec![0.0, 0.0, 0.0, 1.0],
                vec![0.0, 0.0, 0.0, 1.0],
            ],
        ],
        initial_dist: vec![0.34, 0.33, 0.33, 0.0],
        terminals: vec![3],
        reward: vec![
            vec![0.70, 0.50, 0.35],
            vec![0.40, 0.65, 0.50],
            vec![0.55, 0.30, 0.60],
            vec![0.0, 0.0, 0.0],
        ],
        sigma: None,
    }
}

fn built_mdp(spec: &MdpSpec) -> crate::env::Mdp {
    match EnvironmentDef::Mdp(spec.clone())
        .build()
        .expect("fixture builds")
    {
        Environment::Mdp(mdp) => mdp,
        Environment::Bandit(_) => unreachable!("fixture is an MDP"),
    }
}

fn sqrt_guarantee() -> FGuarantee {
    FGuarantee::Schedule(
        EstimateSchedule::new(1.0, 0.5, NoiseMode::RandomDirection).expect("valid schedule"),
    )
}

/// Greedy best responses to the predictions never fall behind the learner
/// they imitate by more than one unit of reward: on bandits,
/// `d_br <= 1 + realized regret`, exactly, for every learner kind.
pub fn check_br_stateless(opts: &VerifyOptions) -> CheckRecord {
    let name = "br-stateless";
    let seed_count = opts.seeds_or(100);
    if seed_count == 0 {
        return CheckRecord::not_applicable(name, 0, None);
    }
    let horizon = 1000;
    let mut worst = f64::NEG_INFINITY;
    for learner in all_learner_specs() {
        let resolved = resolve_inline(
            bandit(vec![0.3, 0.85, 0.55], 1.7),
            learner,
            best_response_pred(),
            vec![MeasureKind::Br],
            horizon,
            0.1,
        );
        let kind_worst = (0..seed_count as u64)
            .into_par_iter()
            .map(|seed| {
                let out = run_experiment(&resolved, seed).expect("bandit run");
                let summary = &out.record.summary;
                summary.final_measures["br"] - 1.0 - summary.measured_regret
            })
            .reduce(|| f64::NEG_INFINITY, f64::max);
        worst = worst.max(kind_worst);
    }
    CheckRecord::upper(name, worst, 0.0, seed_count, None)
}

/// The stateful analog on three proper MDPs: the greedy policies induced by
/// the predictions lose at most `|S|` plus the learner's own policy regret.
pub fn check_br_stateful(opts: &VerifyOptions) -> CheckRecord {
    let name = "br-stateful";
    let seed_count = opts.seeds_or(100);
    if seed_count == 0 {
        return CheckRecord::not_applicable(name, 0, None);
    }
    let horizon = 2000;
    let mut worst = f64::NEG_INFINITY;
    for spec in [drift_mdp(), ring_mdp(), funnel_mdp()] {
        let states = spec.num_states as f64;
        for learner in all_learner_specs() {
            let resolved = resolve_inline(
                EnvironmentDef::Mdp(spec.clone()),
                learner,
                best_response_pred(),
                vec![MeasureKind::Br],
                horizon,
                0.1,
            );
            let kind_worst = (0..seed_count as u64)
                .into_par_iter()
                .map(|seed| {
                    let out = run_experiment(&resolved, seed).expect("mdp run");
                    let summary = &out.record.summary;
                    summary.final_measures["br"] - states - summary.measured_regret
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            worst = worst.max(kind_worst);
        }
    }
    CheckRecord::upper(name, worst, 0.0, seed_count, None)
}

fn epsilon_in_domain(epsilon: f64) -> bool {
    epsilon > 0.0 && epsilon < 1.0
}

/// Certifies the cumulative sup-norm recovery bound for the frequency
/// inversion against a Boltzmann learner on a bandit: the realized error
/// from the exploration time on stays under the high-probability RHS in at
/// least a `1 - epsilon` fraction of seeds.
pub fn check_linfty_stateless(opts: &VerifyOptions) -> CheckRecord {
    let name = "linfty-stateless-coverage";
    let seed_count = opts.seeds_or(200);
    let epsilon = opts.epsilon_or(0.1);
    if seed_count == 0 || !epsilon_in_domain(epsilon) {
        return CheckRecord::not_applicable(name, seed_count, Some(epsilon));
    }
    let horizon = 5000;
    let resolved = resolve_inline(
        bandit(vec![1.0, 0.6, 0.2], 1.8),
        boltzmann_learner(),
        averaging_pred(2.0, SigmaSpec::Scalar(1.8)),
        vec![MeasureKind::Linf],
        horizon,
        epsilon,
    );
    let covered = (0..seed_count as u64)
        .into_par_iter()
        .filter(|&seed| {
            let out = run_experiment(&resolved, seed).expect("bandit run");
            let wb = &out.whitebox;
            let Some(series) = wb.stateless_bound_series() else {
                return false;
            };
            let truth = wb.truth_reward.as_ref().expect("bandit truth");
            let trace = wb.stateless_trace.as_ref().expect("stateless trace");
            let lhs = norm_distance_stateless(
                truth,
                &trace[series.explored_from - 1..],
                NormKind::Linf,
            );
            let inputs = BoundInputs {
                horizon,
                epsilon,
                beta: 2.0,
                action_count: 3,
                state_count: 1,
                f: sqrt_guarantee(),
                series: BoundSeries::Stateless(series),
            };
            match linfty_bound(&inputs) {
                Ok(rhs) => lhs <= rhs,
                Err(_) => false,
            }
        })
        .count();
    let fraction = covered as f64 / seed_count as f64;
    CheckRecord::lower(name, fraction, 1.0 - epsilon, seed_count, Some(epsilon))
}

/// Fits the growth rate of the cumulative recovery error over two decades
/// of horizon; anything at or below 0.65 is consistent with the predicted
/// `sqrt(T log T)` scaling and rules out linear drift.
pub fn check_linfty_growth(opts: &VerifyOptions) -> CheckRecord {
    let name = "linfty-growth-slope";
    let seed_count = opts.seeds_or(50);
    let epsilon = opts.epsilon_or(0.1);
    if seed_count == 0 || !epsilon_in_domain(epsilon) {
        return CheckRecord::not_applicable(name, seed_count, Some(epsilon));
    }
    let checkpoints = [100usize, 1000, 10_000];
    let horizon = *checkpoints.last().expect("nonempty");
    let resolved = resolve_inline(
        bandit(vec![1.0, 0.6, 0.2], 1.8),
        boltzmann_learner(),
        averaging_pred(2.0, SigmaSpec::Scalar(1.8)),
        vec![MeasureKind::Linf],
        horizon,
        epsilon,
    );
    let sums: Vec<[f64; 3]> = (0..seed_count as u64)
        .into_par_iter()
        .map(|seed| {
            let out = run_experiment(&resolved, seed).expect("bandit run");
            let wb = &out.whitebox;
            let truth = wb.truth_reward.as_ref().expect("bandit truth");
            let trace = wb.stateless_trace.as_ref().expect("stateless trace");
            let explored = wb.explored_from[0];
            let mut acc = 0.0;
            let mut at = [0.0f64; 3];
            for t in 1..=horizon {
                if explored.is_some_and(|te| t >= te) {
                    acc += norm_distance_stateless(
                        truth,
                        std::slice::from_ref(&trace[t - 1]),
                        NormKind::Linf,
                    );
                }
                if let Some(slot) = checkpoints.iter().position(|&k| k == t) {
                    at[slot] = acc;
                }
            }
            at
        })
        .collect();
    let means: Vec<f64> = (0..3)
        .map(|i| sums.iter().map(|s| s[i]).sum::<f64>() / seed_count as f64)
        .collect();
    if means.iter().any(|&m| m <= 0.0) {
        return CheckRecord::upper(name, f64::INFINITY, 0.65, seed_count, Some(epsilon));
    }
    let xs: Vec<f64> = checkpoints.iter().map(|&k| (k as f64).ln()).collect();
    let ys: Vec<f64> = means.iter().map(|&m| m.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let y_mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let cov: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let var: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    CheckRecord::upper(name, cov / var, 0.65, seed_count, Some(epsilon))
}

/// Visit-weighted recovery certification on a proper MDP: the streamed
/// weighted sup-norm error stays under the stateful RHS in at least a
/// `1 - epsilon` fraction of seeds.
pub fn check_linfty_stateful(opts: &VerifyOptions) -> CheckRecord {
    let name = "linfty-stateful-coverage";
    let seed_count = opts.seeds_or(200);
    let epsilon = opts.epsilon_or(0.1);
    if seed_count == 0 || !epsilon_in_domain(epsilon) {
        return CheckRecord::not_applicable(name, seed_count, Some(epsilon));
    }
    let horizon = 5000;
    let spec = recovery_mdp();
    let mdp = built_mdp(&spec);
    let q_star = solve_q_star(&mdp, Q_STAR_TOL, Q_STAR_MAX_ITER).expect("proper fixture");
    let resolved = resolve_inline(
        EnvironmentDef::Mdp(spec),
        boltzmann_learner(),
        averaging_pred(2.0, SigmaSpec::PerState(q_star.row_sums())),
        vec![MeasureKind::Linf],
        horizon,
        epsilon,
    );
    let covered = (0..seed_count as u64)
        .into_par_iter()
        .filter(|&seed| {
            let out = run_experiment(&resolved, seed).expect("mdp run");
            let lhs = out
                .record
                .rows
                .last()
                .and_then(|row| row.linf_cum)
                .expect("linf requested");
            let inputs = BoundInputs {
                horizon,
                epsilon,
                beta: 2.0,
                action_count: 3,
                state_count: 4,
                f: sqrt_guarantee(),
                series: BoundSeries::Stateful(out.whitebox.stateful_bound_series()),
            };
            match linfty_bound(&inputs) {
                Ok(rhs) => lhs <= rhs,
                Err(_) => false,
            }
        })
        .count();
    let fraction = covered as f64 / seed_count as f64;
    CheckRecord::lower(name, fraction, 1.0 - epsilon, seed_count, Some(epsilon))
}

/// Witnesses the hardness floor: against a learner that never reveals
/// anything, every shipped predictor accumulates at least `(T/2) * gap` of
/// l2 error on one member of the adversarial reward pair. The runs are
/// deterministic, so this is an exact certificate, and at two actions the
/// per-step rate clears the 0.3535 floor that marks linear growth.
pub fn check_impossibility() -> Vec<CheckRecord> {
    let horizon = 1000;
    let mut records = Vec::new();
    for m in [2usize, 4] {
        let (uniform, indicator) = adversarial_pair(m).expect("at least two actions");
        let floor = adversarial_l2_lower_bound(m, horizon).expect("at least two actions");
        let predictors = [
            ("best-response", best_response_pred()),
            ("averaging", averaging_pred(1.0, SigmaSpec::Scalar(1.0))),
            ("constant-zero", constant_zero_pred()),
        ];
        for (label, predictor) in predictors {
            let mut learner = bare_learner(LearnerKind::ConstantAction);
            learner.fixed_action = Some(0);
            let resolved = resolve_inline(
                bandit(uniform.values.clone(), 1.0),
                learner,
                predictor,
                vec![MeasureKind::L2],
                horizon,
                0.1,
            );
            let out = run_experiment(&resolved, 0).expect("bandit run");
            let trace = out.whitebox.stateless_trace.as_ref().expect("stateless");
            let vs_uniform = norm_distance_stateless(&uniform, trace, NormKind::L2);
            let vs_indicator = norm_distance_stateless(&indicator, trace, NormKind::L2);
            let measured = vs_uniform.max(vs_indicator);
            let mut record = CheckRecord::lower(
                &format!("impossibility-{label}-{m}-actions"),
                measured,
                floor,
                1,
                None,
            );
            if m == 2 && measured / (horizon as f64) < 0.3535 {
                record.status = CheckStatus::Fail;
            }
            records.push(record);
        }
    }
    records
}

fn random_simplex(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= total;
    }
    v
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Random-trial certification of the analytic ingredients: the Pinsker
/// chain, the softmax Lipschitz constant, Boltzmann translation invariance,
/// and the frequency-inversion round trip. Zero failures tolerated.
pub fn check_proof_machinery(opts: &VerifyOptions) -> Vec<CheckRecord> {
    let trials = opts.seeds_or(10_000);
    let names = [
        "pinsker-chain",
        "softmax-lipschitz",
        "translation-invariance",
        "averaging-round-trip",
    ];
    if trials == 0 {
        return names
            .iter()
            .map(|n| CheckRecord::not_applicable(n, 0, None))
            .collect();
    }
    let mut records = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = 0usize;
    for _ in 0..trials {
        let m = rng.gen_range(2..=6);
        let p = random_simplex(&mut rng, m);
        let q = random_simplex(&mut rng, m);
        let kl = kl_divergence(&p, &q);
        let tv = tv_distance(&p, &q);
        let l2_sq: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
        if kl + 1e-12 < 2.0 * tv * tv || 2.0 * tv * tv + 1e-15 < 0.5 * l2_sq {
            failures += 1;
        }
    }
    records.push(CheckRecord::upper(names[0], failures as f64, 0.0, trials, None));

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut failures = 0usize;
    for _ in 0..trials {
        let m = rng.gen_range(2..=6);
        let beta = rng.gen_range(0.1..5.0);
        let r: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let r2: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let p = boltzmann_policy(&r, beta).expect("finite values").probs;
        let p2 = boltzmann_policy(&r2, beta).expect("finite values").probs;
        if sup_gap(&p, &p2) > beta / 2.0 * sup_gap(&r, &r2) + 1e-12 {
            failures += 1;
        }
    }
    records.push(CheckRecord::upper(names[1], failures as f64, 0.0, trials, None));

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut failures = 0usize;
    for _ in 0..trials {
        let m = rng.gen_range(2..=6);
        let beta = rng.gen_range(0.1..5.0);
        let r: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let shift = rng.gen_range(-50.0..50.0);
        let shifted: Vec<f64> = r.iter().map(|x| x + shift).collect();
        let p = boltzmann_policy(&r, beta).expect("finite values").probs;
        let p2 = boltzmann_policy(&shifted, beta).expect("finite values").probs;
        if sup_gap(&p, &p2) > 1e-12 {
            failures += 1;
        }
    }
    records.push(CheckRecord::upper(names[2], failures as f64, 0.0, trials, None));

    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut failures = 0usize;
    for _ in 0..trials {
        let m = rng.gen_range(2..=6);
        let counts: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=50)).collect();
        let beta = rng.gen_range(0.5..4.0);
        let sigma = rng.gen_range(-2.0..2.0);
        let table =
            averaging_predictor_stateless(&counts, beta, sigma).expect("full support counts");
        let probs = boltzmann_policy(&table.values, beta).expect("finite table").probs;
        let total: usize = counts.iter().sum();
        let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let sum: f64 = table.values.iter().sum();
        if sup_gap(&probs, &freq) > 1e-12 || (sum - sigma).abs() > 1e-12 {
            failures += 1;
        }
    }
    records.push(CheckRecord::upper(names[3], failures as f64, 0.0, trials, None));

    records
}

fn random_table(rng: &mut impl Rng, len: usize) -> RewardTable {
    RewardTable::new((0..len).map(|_| rng.gen_range(0.0..1.0)).collect()).expect("finite values")
}

/// The mean of a prediction trace is at least as close to the truth, in
/// cumulative l2, as the trace itself: `T * d(mean, R*) <= sum_t d(R_t, R*)`.
fn reduction_jensen(trials: usize) -> CheckRecord {
    let name = "jensen-average";
    if trials == 0 {
        return CheckRecord::not_applicable(name, 0, None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut failures = 0usize;
    for _ in 0..trials {
        let m = rng.gen_range(2..=5);
        let len = rng.gen_range(1..=30);
        let truth = random_table(&mut rng, m);
        let trace: Vec<RewardTable> = (0..len).map(|_| random_table(&mut rng, m)).collect();
        let mean = reduce_perstep_to_final(&trace, FinalReduction::Average, &mut rng)
            .expect("nonempty trace");
        let lhs = len as f64
            * norm_distance_stateless(&truth, std::slice::from_ref(&mean), NormKind::L2);
        let rhs = norm_distance_stateless(&truth, &trace, NormKind::L2);
        if lhs > rhs + 1e-9 {
            failures += 1;
        }
    }
    CheckRecord::upper(name, failures as f64, 0.0, trials, None)
}

/// Pigeonhole transfer from per-step to final best-response loss: the
/// majority argmax action satisfies `T * gap <= |A| * d_br(trace)`.
fn reduction_br_majority(trials: usize) -> CheckRecord {
    let name = "br-majority";
    if trials == 0 {
        return CheckRecord::not_applicable(name, 0, None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut failures = 0usize;
    for _ in 0..trials {
        let m = rng.gen_range(2..=5);
        let len = rng.gen_range(1..=30);
        let truth = random_table(&mut rng, m);
        let trace: Vec<RewardTable> = (0..len).map(|_| random_table(&mut rng, m)).collect();
        let majority = reduce_perstep_to_final(&trace, FinalReduction::BrMajority, &mut rng)
            .expect("nonempty trace");
        let gap = truth.max() - truth.values[majority.argmax()];
        if len as f64 * gap > m as f64 * d_br_stateless(&truth, &trace) + 1e-9 {
            failures += 1;
        }
    }
    CheckRecord::upper(name, failures as f64, 0.0, trials, None)
}

/// The per-step error sum `sum_t f(t)/t` for `f(t) = sqrt(t)` stays under
/// both closed-form envelopes: the generic `f(T)(ln T + 1)` and the sharper
/// power-law integral `1 + (T^alpha - 1)/alpha`.
fn reduction_log_factor() -> CheckRecord {
    let horizon = 10_000usize;
    let partial = sqrt_guarantee().prefix(horizon)[horizon];
    let t = horizon as f64;
    let log_envelope = t.sqrt() * (t.ln() + 1.0);
    let power_envelope = 1.0 + (t.powf(0.5) - 1.0) / 0.5;
    CheckRecord::upper(
        "log-factor-envelopes",
        partial,
        log_envelope.min(power_envelope),
        0,
        None,
    )
}

/// The trace-to-final reductions, certified on random traces plus the
/// deterministic envelope comparison.
pub fn check_reductions(opts: &VerifyOptions) -> Vec<CheckRecord> {
    let trials = opts.seeds_or(1000);
    vec![
        reduction_jensen(trials),
        reduction_br_majority(trials),
        reduction_log_factor(),
    ]
}

/// Empirical coverage of the concentration event the recovery bound
/// conditions on: empirical action frequencies stay within the radius of
/// their running mean policies, jointly over all steps, in at least a
/// `1 - epsilon` fraction of seeds.
pub fn check_azuma_coverage(opts: &VerifyOptions) -> CheckRecord {
    let name = "azuma-coverage";
    let seed_count = opts.seeds_or(500);
    let epsilon = opts.epsilon_or(0.1);
    if seed_count == 0 || !epsilon_in_domain(epsilon) {
        return CheckRecord::not_applicable(name, seed_count, Some(epsilon));
    }
    let horizon = 1000;
    let resolved = resolve_inline(
        bandit(vec![1.0, 0.6, 0.2], 1.8),
        boltzmann_learner(),
        constant_zero_pred(),
        vec![MeasureKind::Br],
        horizon,
        epsilon,
    );
    let covered = (0..seed_count as u64)
        .into_par_iter()
        .filter(|&seed| {
            let out = run_experiment(&resolved, seed).expect("bandit run");
            azuma_event_holds(&out.whitebox.flat_policies(), &out.whitebox.actions, epsilon)
                .expect("aligned streams")
        })
        .count();
    let fraction = covered as f64 / seed_count as f64;
    CheckRecord::lower(name, fraction, 1.0 - epsilon, seed_count, Some(epsilon))
}

struct OracleProbe {
    name: &'static str,
    tolerance: f64,
    relative: bool,
    implementation: Vec<f64>,
}

fn constant_kappa_rhs() -> f64 {
    let horizon = 10_000;
    let inputs = BoundInputs {
        horizon,
        epsilon: 0.1,
        beta: 2.0,
        action_count: 3,
        state_count: 1,
        f: sqrt_guarantee(),
        series: BoundSeries::Stateless(StatelessSeries {
            explored_from: 4,
            kappa: vec![Some(0.25); horizon],
        }),
    };
    linfty_bound(&inputs).expect("inputs in domain")
}

/// Every frozen reference value is recomputed through the shipped code
/// paths and compared at its stated tolerance. The measured figure is the
/// worst deviation as a fraction of the allowed tolerance.
fn oracle_constants() -> CheckRecord {
    let horizon = 10_000f64;
    let swapped_p = boltzmann_policy(&[0.0, 1.0], 1.0).expect("finite").probs;
    let swapped_q = boltzmann_policy(&[1.0, 0.0], 1.0).expect("finite").probs;
    let probes = vec![
        OracleProbe {
            name: "boltzmann-two-action",
            tolerance: 1e-12,
            relative: false,
            implementation: boltzmann_policy(&[1.0, 0.0], 1.0).expect("finite").probs,
        },
        OracleProbe {
            name: "averaging-closed-form",
            tolerance: 1e-12,
            relative: false,
            implementation: averaging_predictor_stateless(&[2, 1, 1], 1.0, 0.0)
                .expect("full support")
                .values,
        },
        OracleProbe {
            name: "partial-sum-sqrt-100",
            tolerance: 1e-9,
            relative: false,
            implementation: vec![sqrt_guarantee().prefix(100)[100]],
        },
        OracleProbe {
            name: "partial-sum-sqrt-1e4",
            tolerance: 1e-9,
            relative: false,
            implementation: vec![sqrt_guarantee().prefix(10_000)[10_000]],
        },
        OracleProbe {
            name: "final-perstep-bounds",
            tolerance: 1e-9,
            relative: false,
            implementation: vec![
                sqrt_guarantee().prefix(10_000)[10_000],
                horizon.sqrt() * (horizon.ln() + 1.0),
                1.0 + (horizon.powf(0.5) - 1.0) / 0.5,
            ],
        },
        OracleProbe {
            name: "concentration-radius",
            tolerance: 1e-12,
            relative: false,
            implementation: vec![concentration_radius(101, 2, 1, 101, 0.1).expect("in domain")],
        },
        OracleProbe {
            name: "kl-swapped-boltzmann",
            tolerance: 1e-12,
            relative: false,
            implementation: vec![kl_divergence(&swapped_p, &swapped_q)],
        },
        OracleProbe {
            name: "kl-br-bound",
            tolerance: 1e-12,
            relative: false,
            implementation: vec![kl_to_br_perstep_bound(0.02, 2, 1.0).expect("in domain")],
        },
        OracleProbe {
            name: "adversarial-norms",
            tolerance: 1e-12,
            relative: false,
            implementation: vec![
                adversarial_pair_gap(2).expect("two actions"),
                adversarial_l2_lower_bound(2, 10).expect("two actions"),
                adversarial_pair_gap(4).expect("four actions"),
            ],
        },
        OracleProbe {
            name: "linfty-rhs-constant-kappa",
            tolerance: 1e-6,
            relative: true,
            implementation: vec![constant_kappa_rhs()],
        },
    ];
    let mut worst = 0.0f64;
    for probe in probes {
        let reference = oracle::value(probe.name).expect("oracle names are stable");
        if reference.values.len() != probe.implementation.len() {
            worst = f64::INFINITY;
            break;
        }
        for (imp, orc) in probe.implementation.iter().zip(&reference.values) {
            let allowed = if probe.relative {
                probe.tolerance * orc.abs()
            } else {
                probe.tolerance
            };
            worst = worst.max((imp - orc).abs() / allowed);
        }
    }
    CheckRecord::upper("oracle-constants", worst, 1.0, 0, None)
}

/// Propagation-based returns agree with exhaustive enumeration over all
/// trajectories and deterministic policy assignments on small MDPs, for
/// optimal returns, arbitrary stochastic policy sequences, and the greedy
/// best-response loss.
fn oracle_enumeration() -> CheckRecord {
    let sizes = [(1usize, 2usize, 3usize), (2, 2, 3), (2, 3, 4), (3, 2, 4), (3, 3, 4)];
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for &(states, actions, horizon) in &sizes {
        for _ in 0..5 {
            let mdp = oracle::random_mdp(states, actions, &mut rng);
            let opt_propagated =
                finite_horizon_optimal_return(&mdp, horizon).expect("well formed");
            let opt_enumerated = oracle::enumerate_optimal_return(&mdp, horizon);
            worst = worst.max((opt_propagated - opt_enumerated).abs());

            let policies: Vec<Vec<PolicyDist>> = (0..horizon)
                .map(|_| {
                    (0..states)
                        .map(|_| {
                            PolicyDist::new(random_simplex(&mut rng, actions))
                                .expect("valid distribution")
                        })
                        .collect()
                })
                .collect();
            let ret_propagated = expected_policy_return(&mdp, &policies);
            let ret_enumerated = oracle::enumerate_policy_return(&mdp, &policies);
            worst = worst.max((ret_propagated - ret_enumerated).abs());

            let trace: Vec<QEstimate> = (0..horizon)
                .map(|_| QEstimate {
                    rows: (0..states)
                        .map(|_| {
                            if rng.gen_bool(0.25) {
                                None
                            } else {
                                Some((0..actions).map(|_| rng.gen_range(-1.0..1.0)).collect())
                            }
                        })
                        .collect(),
                })
                .collect();
            let br_propagated =
                crate::measures::d_br_stateful(&mdp, &trace).expect("consistent trace");
            let greedy: Vec<Vec<PolicyDist>> = trace
                .iter()
                .map(|est| greedy_policy_step(est, actions))
                .collect();
            let br_enumerated =
                opt_enumerated - oracle::enumerate_policy_return(&mdp, &greedy);
            worst = worst.max((br_propagated - br_enumerated).abs());
        }
    }
    CheckRecord::upper("oracle-enumeration", worst, 1e-9, 0, None)
}

/// Reference values and the propagation-vs-enumeration cross checks.
pub fn check_oracle_equivalence() -> Vec<CheckRecord> {
    vec![oracle_constants(), oracle_enumeration()]
}

pub fn available_suites() -> Vec<&'static str> {
    vec![
        "all",
        "br",
        "coverage",
        "deterministic",
        "impossibility",
        "linfty",
        "oracle",
        "proof-machinery",
        "reductions",
    ]
}

/// Run one named suite. Unknown names return `None`; the caller lists
/// [`available_suites`] in its error message.
pub fn run_suite(name: &str, opts: &VerifyOptions) -> Option<SuiteReport> {
    let start = Instant::now();
    let checks = match name {
        "all" => {
            let mut v = vec![
                check_br_stateless(opts),
                check_br_stateful(opts),
                check_linfty_stateless(opts),
                check_linfty_growth(opts),
                check_linfty_stateful(opts),
            ];
            v.extend(check_impossibility());
            v.extend(check_proof_machinery(opts));
            v.extend(check_reductions(opts));
            v.push(check_azuma_coverage(opts));
            v.extend(check_oracle_equivalence());
            v
        }
        "br" => vec![check_br_stateless(opts), check_br_stateful(opts)],
        "linfty" => vec![
            check_linfty_stateless(opts),
            check_linfty_growth(opts),
            check_linfty_stateful(opts),
        ],
        "impossibility" => check_impossibility(),
        "proof-machinery" => check_proof_machinery(opts),
        "reductions" => check_reductions(opts),
        "coverage" => vec![check_azuma_coverage(opts)],
        "oracle" => check_oracle_equivalence(),
        "deterministic" => {
            let mut v = check_impossibility();
            v.push(reduction_log_factor());
            v.extend(check_oracle_equivalence());
            v
        }
        _ => return None,
    };
    Some(SuiteReport {
        suite: name.to_string(),
        checks,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suites_are_rejected_and_the_catalog_is_sorted() {
        assert!(run_suite("definitely-not-a-suite", &VerifyOptions::default()).is_none());
        let suites = available_suites();
        let mut sorted = suites.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(suites, sorted);
    }

    #[test]
    fn impossibility_certificates_hold_for_every_shipped_predictor() {
        let records = check_impossibility();
        assert_eq!(records.len(), 6);
        for record in &records {
            assert_eq!(record.status, CheckStatus::Pass, "{}", record.name);
            let measured = record.measured.expect("measured");
            assert!(measured >= record.bound.expect("bound"));
            if record.name.ends_with("2-actions") {
                assert!(measured / 1000.0 >= 0.3535, "{}", record.name);
            }
        }
    }

    #[test]
    fn log_factor_envelopes_hold_with_room() {
        let record = reduction_log_factor();
        assert_eq!(record.status, CheckStatus::Pass);
        assert!(record.measured.expect("measured") < record.bound.expect("bound"));
    }

    #[test]
    fn oracle_constants_agree_through_the_shipped_code_paths() {
        let record = oracle_constants();
        assert_eq!(record.status, CheckStatus::Pass);
        assert!(record.measured.expect("measured") <= 1.0);
    }

    #[test]
    fn machinery_and_random_reductions_pass_at_reduced_trial_counts() {
        let opts = VerifyOptions {
            epsilon: None,
            seeds: Some(400),
        };
        for record in check_proof_machinery(&opts) {
            assert_eq!(record.status, CheckStatus::Pass, "{}", record.name);
            assert_eq!(record.seeds, 400);
        }
        for record in check_reductions(&opts) {
            assert_eq!(record.status, CheckStatus::Pass, "{}", record.name);
        }
    }

    #[test]
    fn out_of_domain_epsilon_yields_not_applicable_not_numbers() {
        let opts = VerifyOptions {
            epsilon: Some(1.5),
            seeds: Some(2),
        };
        let record = check_linfty_stateless(&opts);
        assert_eq!(record.status, CheckStatus::NotApplicable);
        assert!(record.measured.is_none());
        assert!(record.bound.is_none());
        let record = check_azuma_coverage(&opts);
        assert_eq!(record.status, CheckStatus::NotApplicable);
    }

    #[test]
    fn zero_seeds_make_seeded_checks_not_applicable() {
        let opts = VerifyOptions {
            epsilon: None,
            seeds: Some(0),
        };
        assert_eq!(
            check_br_stateless(&opts).status,
            CheckStatus::NotApplicable
        );
        for record in check_proof_machinery(&opts) {
            assert_eq!(record.status, CheckStatus::NotApplicable);
        }
    }

    #[test]
    fn report_json_round_trips() {
        let report = run_suite("reductions", &VerifyOptions {
            epsilon: None,
            seeds: Some(50),
        })
        .expect("known suite");
        let text = serde_json::to_string_pretty(&report).expect("serializable");
        let back: SuiteReport = serde_json::from_str(&text).expect("parseable");
        assert_eq!(back.suite, report.suite);
        assert_eq!(back.checks.len(), report.checks.len());
        assert!(back.all_passed());
    }

    #[test]
    fn br_stateless_holds_on_a_handful_of_seeds() {
        let record = check_br_stateless(&VerifyOptions {
            epsilon: None,
            seeds: Some(5),
        });
        assert_eq!(record.status, CheckStatus::Pass);
        assert!(record.measured.expect("measured") <= 0.0);
    }
}
