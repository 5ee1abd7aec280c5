//! Certified quantities: concentration radii, the cumulative sup-norm
//! recovery bound for the frequency-inversion predictor, the adversarial
//! reward pair behind the hardness certificate, and the KL-to-best-response
//! transfer bound.

use thiserror::Error;

use crate::env::{PolicyDist, RewardTable};
use crate::learners::EstimateSchedule;

#[derive(Debug, Error)]
pub enum BoundError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
}

/// Cumulative estimate-error guarantee `f(n)`, either the exact partial sum
/// of a synthesized schedule or a plain power law `scale * n^exponent`.
#[derive(Debug, Clone, PartialEq)]
pub enum FGuarantee {
    Schedule(EstimateSchedule),
    Power { scale: f64, exponent: f64 },
}

impl FGuarantee {
    /// Values `f(0), f(1), ..., f(upto)` with `f(0) = 0`.
    pub fn prefix(&self, upto: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(upto + 1);
        out.push(0.0);
        match self {
            FGuarantee::Schedule(s) => {
                let mut acc = 0.0;
                for n in 1..=upto {
                    acc += s.per_step_error(n);
                    out.push(acc);
                }
            }
            FGuarantee::Power { scale, exponent } => {
                for n in 1..=upto {
                    out.push(scale * (n as f64).powf(*exponent));
                }
            }
        }
        out
    }
}

/// High-probability radius on the sup-norm gap between empirical action
/// frequencies and their conditional means at step `t`:
/// `sqrt(2 ln(2 |S| |A| (T-1) / epsilon) / (t-1))`, valid simultaneously
/// for all steps `2..=T` with probability at least `1 - epsilon`.
pub fn concentration_radius(
    t: usize,
    action_count: usize,
    state_count: usize,
    horizon: usize,
    epsilon: f64,
) -> Result<f64, BoundError> {
    if t < 2 || t > horizon {
        return Err(BoundError::InvalidArgument(format!(
            "radius is defined for 2 <= t <= horizon, got t={t}, horizon={horizon}"
        )));
    }
    if action_count == 0 || state_count == 0 {
        return Err(BoundError::InvalidArgument(
            "need at least one state and one action".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(BoundError::InvalidArgument(format!(
            "epsilon must lie strictly between 0 and 1, got {epsilon}"
        )));
    }
    let union = 2.0 * state_count as f64 * action_count as f64 * (horizon - 1) as f64 / epsilon;
    Ok((2.0 * union.ln() / (t - 1) as f64).sqrt())
}

/// Per-step data the stateless recovery bound needs: the first fully
/// supported step and, for each step, the floor
/// `kappa_t = min_a min(p_t(a), p*(a))` when it is defined.
#[derive(Debug, Clone)]
pub struct StatelessSeries {
    pub explored_from: usize,
    pub kappa: Vec<Option<f64>>,
}

/// The stateful analog, indexed `[t-1][s]`, plus per-state visit counts
/// strictly before each step.
#[derive(Debug, Clone)]
pub struct StatefulSeries {
    pub explored_from: Vec<Option<usize>>,
    pub kappa: Vec<Vec<Option<f64>>>,
    pub visits_before: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub enum BoundSeries {
    Stateless(StatelessSeries),
    Stateful(StatefulSeries),
}

/// Everything the recovery bound depends on.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    pub horizon: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub action_count: usize,
    pub state_count: usize,
    pub f: FGuarantee,
    pub series: BoundSeries,
}

/// Evaluate the high-probability upper bound on the cumulative sup-norm
/// recovery error of the frequency-inversion predictor.
///
/// Stateless: `sum_{t >= t_e} (2 / (beta kappa_t)) sqrt(2L/(t-1))
/// + (1/kappa_t) f(t-1)/(t-1)` with `L = ln(2|S||A|(T-1)/epsilon)`.
/// Stateful: the same concentration term per (state, step) from each
/// state's own `t_e(s)`, with estimate term
/// `(1/kappa_t(s)) f(N_{t-1}(s)) / sqrt((t-1) N_{t-1}(s))`.
pub fn linfty_bound(inputs: &BoundInputs) -> Result<f64, BoundError> {
    let t_max = inputs.horizon;
    if !inputs.beta.is_finite() || inputs.beta <= 0.0 {
        return Err(BoundError::InvalidArgument(format!(
            "beta must be finite and positive, got {}",
            inputs.beta
        )));
    }
    if t_max < 2 {
        return Err(BoundError::InvalidArgument(
            "horizon must be at least 2 for any concentration statement".into(),
        ));
    }
    if !(inputs.epsilon > 0.0 && inputs.epsilon < 1.0) {
        return Err(BoundError::InvalidArgument(format!(
            "epsilon must lie strictly between 0 and 1, got {}",
            inputs.epsilon
        )));
    }
    let log_term = (2.0
        * inputs.state_count as f64
        * inputs.action_count as f64
        * (t_max - 1) as f64
        / inputs.epsilon)
        .ln();
    let f = inputs.f.prefix(t_max);
    let mut concentration = 0.0;
    let mut estimate = 0.0;
    match &inputs.series {
        BoundSeries::Stateless(series) => {
            if series.explored_from < 2 {
                return Err(BoundError::InvalidArgument(
                    "full support needs at least one observed step, so t_e >= 2".into(),
                ));
            }
            if series.kappa.len() < t_max {
                return Err(BoundError::InvalidArgument(format!(
                    "kappa series covers {} steps, horizon is {t_max}",
                    series.kappa.len()
                )));
            }
            for t in series.explored_from..=t_max {
                let kappa = series.kappa[t - 1].ok_or_else(|| {
                    BoundError::InvalidArgument(format!("kappa undefined at summed step {t}"))
                })?;
                if kappa.is_nan() || kappa <= 0.0 {
                    return Err(BoundError::InvalidArgument(format!(
                        "kappa must be positive, got {kappa} at step {t}"
                    )));
                }
                let steps = (t - 1) as f64;
                concentration += (2.0 * log_term / steps).sqrt() / kappa;
                estimate += f[t - 1] / (steps * kappa);
            }
        }
        BoundSeries::Stateful(series) => {
            if series.kappa.len() < t_max || series.visits_before.len() < t_max {
                return Err(BoundError::InvalidArgument(format!(
                    "series cover {} steps, horizon is {t_max}",
                    series.kappa.len().min(series.visits_before.len())
                )));
            }
            for (s, te) in series.explored_from.iter().enumerate() {
                let Some(te) = *te else { continue };
                if te < 2 {
                    return Err(BoundError::InvalidArgument(format!(
                        "state {s} reports t_e = {te}, but full support needs t_e >= 2"
                    )));
                }
                for t in te..=t_max {
                    let kappa = series.kappa[t - 1][s].ok_or_else(|| {
                        BoundError::InvalidArgument(format!(
                            "kappa undefined at state {s}, step {t}"
                        ))
                    })?;
                    if kappa.is_nan() || kappa <= 0.0 {
                        return Err(BoundError::InvalidArgument(format!(
                            "kappa must be positive, got {kappa} at state {s}, step {t}"
                        )));
                    }
                    let visits = series.visits_before[t - 1][s];
                    if visits == 0 {
                        return Err(BoundError::InvalidArgument(format!(
                            "state {s} has no visits before step {t} yet t_e = {te}"
                        )));
                    }
                    let steps = (t - 1) as f64;
                    concentration += (2.0 * log_term / steps).sqrt() / kappa;
                    estimate += f[visits] / ((steps * visits as f64).sqrt() * kappa);
                }
            }
        }
    }
    Ok(2.0 / inputs.beta * concentration + estimate)
}

/// Whether the concentration event behind the recovery bound held along one
/// realized interaction: at every step `2..=T` the empirical action
/// frequency stayed within the radius of the running mean of the learner's
/// actual per-step policies.
pub fn azuma_event_holds(
    policies: &[PolicyDist],
    actions: &[usize],
    epsilon: f64,
) -> Result<bool, BoundError> {
    if policies.len() != actions.len() {
        return Err(BoundError::InvalidArgument(format!(
            "{} policies for {} actions",
            policies.len(),
            actions.len()
        )));
    }
    let horizon = actions.len();
    if horizon < 2 {
        return Ok(true);
    }
    let action_count = policies[0].len();
    let mut counts = vec![0usize; action_count];
    let mut policy_sums = vec![0.0; action_count];
    for t in 2..=horizon {
        let prev = t - 2;
        counts[actions[prev]] += 1;
        for (sum, &p) in policy_sums.iter_mut().zip(&policies[prev].probs) {
            *sum += p;
        }
        let denom = (t - 1) as f64;
        let radius = concentration_radius(t, action_count, 1, horizon, epsilon)?;
        let mut deviation = 0.0_f64;
        for a in 0..action_count {
            deviation = deviation.max((counts[a] as f64 - policy_sums[a]).abs() / denom);
        }
        if deviation >= radius {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The two reward tables no single predictor can track simultaneously: the
/// uniform table and the first-action indicator, both summing to 1.
pub fn adversarial_pair(action_count: usize) -> Result<(RewardTable, RewardTable), BoundError> {
    if action_count < 2 {
        return Err(BoundError::InvalidArgument(
            "the adversarial pair needs at least two actions".into(),
        ));
    }
    let uniform = vec![1.0 / action_count as f64; action_count];
    let mut indicator = vec![0.0; action_count];
    indicator[0] = 1.0;
    let first = RewardTable::with_sigma(uniform, Some(1.0))
        .map_err(|e| BoundError::InvalidArgument(e.to_string()))?;
    let second = RewardTable::with_sigma(indicator, Some(1.0))
        .map_err(|e| BoundError::InvalidArgument(e.to_string()))?;
    Ok((first, second))
}

/// l2 distance between the two adversarial tables, `sqrt(1 - 1/|A|)`.
pub fn adversarial_pair_gap(action_count: usize) -> Result<f64, BoundError> {
    if action_count < 2 {
        return Err(BoundError::InvalidArgument(
            "the adversarial pair needs at least two actions".into(),
        ));
    }
    Ok((1.0 - 1.0 / action_count as f64).sqrt())
}

/// Any fixed prediction trace accumulates at least this much l2 error
/// against one of the two adversarial tables over `horizon` steps.
pub fn adversarial_l2_lower_bound(
    action_count: usize,
    horizon: usize,
) -> Result<f64, BoundError> {
    Ok(horizon as f64 / 2.0 * adversarial_pair_gap(action_count)?)
}

/// Bound on the single-step best-response gap implied by a policy KL of
/// `kl`: with `delta = sqrt(kl / 2)`, the gap is at most
/// `ln((1 + m delta) / (1 - m delta)) / beta`, defined while
/// `m delta < 1`.
pub fn kl_to_br_perstep_bound(
    kl: f64,
    action_count: usize,
    beta: f64,
) -> Result<f64, BoundError> {
    if !kl.is_finite() || kl < 0.0 {
        return Err(BoundError::InvalidArgument(format!(
            "kl must be finite and nonnegative, got {kl}"
        )));
    }
    if !beta.is_finite() || beta <= 0.0 {
        return Err(BoundError::InvalidArgument(format!(
            "beta must be finite and positive, got {beta}"
        )));
    }
    if action_count == 0 {
        return Err(BoundError::InvalidArgument("need at least one action".into()));
    }
    let delta = (kl / 2.0).sqrt();
    let scaled = action_count as f64 * delta;
    if scaled >= 1.0 {
        return Err(BoundError::OutOfDomain(format!(
            "|A| sqrt(kl/2) = {scaled} >= 1, the transfer bound says nothing here"
        )));
    }
    Ok(((1.0 + scaled) / (1.0 - scaled)).ln() / beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::NoiseMode;

    #[test]
    fn radius_matches_closed_form() {
        // 2 * 1 * 2 * 100 / 0.1 = 4000 inside the log, over t - 1 = 100.
        let r = concentration_radius(101, 2, 1, 101, 0.1).unwrap();
        assert!((r - 0.40728490372470294).abs() < 1e-15);
    }

    #[test]
    fn radius_shrinks_with_t_and_rejects_bad_inputs() {
        let early = concentration_radius(2, 3, 1, 100, 0.1).unwrap();
        let late = concentration_radius(100, 3, 1, 100, 0.1).unwrap();
        assert!(late < early);
        assert!(concentration_radius(1, 3, 1, 100, 0.1).is_err());
        assert!(concentration_radius(5, 3, 1, 4, 0.1).is_err());
        assert!(concentration_radius(5, 3, 1, 100, 0.0).is_err());
        assert!(concentration_radius(5, 3, 1, 100, 1.0).is_err());
    }

    #[test]
    fn stateless_bound_matches_frozen_partial_sums() {
        // Constant kappa = 1/4, beta = 2, |A| = 3, t_e = 4, T = 10^4,
        // epsilon = 0.1, f the exact partial sum of i^(-1/2).
        let schedule = EstimateSchedule::new(1.0, 0.5, NoiseMode::FixedDirection).unwrap();
        let horizon = 10_000;
        let inputs = BoundInputs {
            horizon,
            epsilon: 0.1,
            beta: 2.0,
            action_count: 3,
            state_count: 1,
            f: FGuarantee::Schedule(schedule),
            series: BoundSeries::Stateless(StatelessSeries {
                explored_from: 4,
                kappa: vec![Some(0.25); horizon],
            }),
        };
        let rhs = linfty_bound(&inputs).unwrap();
        assert!(
            (rhs - 5589.926572847784).abs() < 1e-6,
            "rhs {rhs} drifted from the frozen partial-sum value"
        );
    }

    #[test]
    fn stateful_bound_with_one_state_matches_stateless_concentration() {
        // A single state visited every step has N_{t-1}(s) = t - 1, so the
        // estimate term f(t-1)/sqrt((t-1)(t-1)) equals f(t-1)/(t-1) and the
        // whole bound collapses to the stateless expression.
        let schedule = EstimateSchedule::new(1.0, 0.5, NoiseMode::FixedDirection).unwrap();
        let horizon = 500;
        let kappa = 0.2;
        let stateless = BoundInputs {
            horizon,
            epsilon: 0.1,
            beta: 2.0,
            action_count: 3,
            state_count: 1,
            f: FGuarantee::Schedule(schedule),
            series: BoundSeries::Stateless(StatelessSeries {
                explored_from: 5,
                kappa: vec![Some(kappa); horizon],
            }),
        };
        let visits: Vec<Vec<usize>> = (0..horizon).map(|i| vec![i]).collect();
        let stateful = BoundInputs {
            series: BoundSeries::Stateful(StatefulSeries {
                explored_from: vec![Some(5)],
                kappa: vec![vec![Some(kappa)]; horizon],
                visits_before: visits,
            }),
            ..stateless.clone()
        };
        let a = linfty_bound(&stateless).unwrap();
        let b = linfty_bound(&stateful).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn bound_rejects_missing_kappa_in_the_window() {
        let horizon = 10;
        let mut kappa = vec![Some(0.3); horizon];
        kappa[6] = None;
        let inputs = BoundInputs {
            horizon,
            epsilon: 0.1,
            beta: 1.0,
            action_count: 2,
            state_count: 1,
            f: FGuarantee::Power { scale: 0.0, exponent: 0.5 },
            series: BoundSeries::Stateless(StatelessSeries {
                explored_from: 3,
                kappa,
            }),
        };
        assert!(linfty_bound(&inputs).is_err());
    }

    #[test]
    fn azuma_event_trivially_holds_for_deterministic_play() {
        let horizon = 50;
        let policies = vec![PolicyDist::point_mass(3, 1); horizon];
        let actions = vec![1usize; horizon];
        assert!(azuma_event_holds(&policies, &actions, 0.1).unwrap());
    }

    #[test]
    fn azuma_event_fails_when_actions_defy_the_policies() {
        // Uniform policies but the action sequence never moves: the
        // empirical frequency pins to 1 while the policy mean stays 1/2.
        let horizon = 200;
        let policies = vec![PolicyDist::uniform(2); horizon];
        let actions = vec![0usize; horizon];
        assert!(!azuma_event_holds(&policies, &actions, 0.1).unwrap());
    }

    #[test]
    fn adversarial_pair_matches_closed_forms() {
        let (first, second) = adversarial_pair(2).unwrap();
        assert_eq!(first.values, vec![0.5, 0.5]);
        assert_eq!(second.values, vec![1.0, 0.0]);
        assert!(
            (adversarial_pair_gap(2).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15
        );
        assert!((adversarial_pair_gap(4).unwrap() - 0.8660254037844386).abs() < 1e-15);
        assert!(
            (adversarial_l2_lower_bound(2, 10).unwrap() - 3.5355339059327378).abs() < 1e-15
        );
        assert!(adversarial_pair(1).is_err());
    }

    #[test]
    fn kl_transfer_bound_matches_closed_form_and_domain() {
        // kl = 0.02 gives delta = 0.1, so with two actions the bound is
        // ln(1.2 / 0.8) = ln 1.5.
        let b = kl_to_br_perstep_bound(0.02, 2, 1.0).unwrap();
        assert!((b - 0.4054651081081644).abs() < 1e-15);
        let halved = kl_to_br_perstep_bound(0.02, 2, 2.0).unwrap();
        assert!((halved - 0.2027325540540822).abs() < 1e-15);
        match kl_to_br_perstep_bound(0.5, 2, 1.0) {
            Err(BoundError::OutOfDomain(_)) => {}
            other => panic!("expected OutOfDomain, got {other:?}"),
        }
        assert_eq!(kl_to_br_perstep_bound(0.0, 3, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn f_guarantee_prefix_forms_agree_on_their_growth() {
        let schedule = EstimateSchedule::new(1.0, 0.5, NoiseMode::FixedDirection).unwrap();
        let exact = FGuarantee::Schedule(schedule).prefix(100);
        assert!((exact[100] - 18.58960382478415).abs() < 1e-10);
        let power = FGuarantee::Power { scale: 2.0, exponent: 0.5 }.prefix(100);
        assert!((power[100] - 20.0).abs() < 1e-12);
        // The exact partial sum stays below the power-law envelope
        // 2 sqrt(n) that upper-bounds it.
        for n in 1..=100 {
            assert!(exact[n] <= power[n] + 1e-12);
        }
    }
}
