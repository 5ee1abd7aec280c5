//! End-to-end certification gates. Each test exercises one published
//! guarantee at its full stated scale and tolerance, prints the measured
//! figure next to its bound, and fails if the guarantee does not hold.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use prefwatch::harness::verify::{
    check_azuma_coverage, check_br_stateful, check_br_stateless, check_impossibility,
    check_linfty_growth, check_linfty_stateful, check_linfty_stateless, check_oracle_equivalence,
    check_proof_machinery, check_reductions, CheckRecord, CheckStatus, VerifyOptions,
};

/// Wall-clock-limited checks take this lock so parallel test scheduling
/// cannot inflate their timings.
static TIMED: Mutex<()> = Mutex::new(());

fn report(record: &CheckRecord) {
    let measured = record.measured.map_or_else(|| "-".into(), |v| v.to_string());
    let bound = record.bound.map_or_else(|| "-".into(), |v| v.to_string());
    println!(
        "{}: measured={measured} bound={bound} seeds={}",
        record.name, record.seeds
    );
    assert_eq!(record.status, CheckStatus::Pass, "{} failed", record.name);
}

fn timed(limit: Duration, check: impl FnOnce(&VerifyOptions) -> CheckRecord) {
    let _guard = TIMED.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let record = check(&VerifyOptions::default());
    let elapsed = start.elapsed();
    report(&record);
    println!("{} took {:.2}s (limit {:?})", record.name, elapsed.as_secs_f64(), limit);
    assert!(
        elapsed <= limit,
        "{} took {elapsed:?}, over the {limit:?} budget",
        record.name
    );
}

#[test]
fn best_response_to_predictions_stays_within_one_of_the_learner_on_bandits() {
    timed(Duration::from_secs(10), check_br_stateless);
}

#[test]
fn best_response_to_predictions_stays_within_state_count_on_proper_mdps() {
    timed(Duration::from_secs(60), check_br_stateful);
}

#[test]
fn frequency_inversion_error_stays_under_its_bound_on_bandits() {
    timed(Duration::from_secs(120), check_linfty_stateless);
}

#[test]
fn recovery_error_grows_sublinearly_across_two_decades_of_horizon() {
    report(&check_linfty_growth(&VerifyOptions::default()));
}

#[test]
fn visit_weighted_recovery_error_stays_under_the_stateful_bound() {
    report(&check_linfty_stateful(&VerifyOptions::default()));
}

#[test]
fn uninformative_learners_force_linear_error_on_the_adversarial_pair() {
    let records = check_impossibility();
    assert_eq!(records.len(), 6);
    for record in &records {
        report(record);
        if record.name.ends_with("2-actions") {
            let rate = record.measured.expect("measured") / 1000.0;
            println!("{}: per-step rate {rate}", record.name);
            assert!(rate >= 0.3535, "{} rate {rate} under 0.3535", record.name);
        }
    }
}

#[test]
fn proof_machinery_survives_ten_thousand_random_trials_each() {
    let records = check_proof_machinery(&VerifyOptions::default());
    assert_eq!(records.len(), 4);
    for record in &records {
        assert!(record.seeds >= 10_000, "{} ran too few trials", record.name);
        assert_eq!(record.measured, Some(0.0), "{} had failures", record.name);
        report(record);
    }
}

#[test]
fn trace_reductions_hold_on_random_traces_and_the_envelopes_are_respected() {
    let records = check_reductions(&VerifyOptions::default());
    assert_eq!(records.len(), 3);
    for record in &records {
        report(record);
    }
}

#[test]
fn concentration_event_covers_at_the_certified_rate() {
    let record = check_azuma_coverage(&VerifyOptions::default());
    assert!(record.seeds >= 500);
    report(&record);
}

#[test]
fn oracle_values_and_brute_force_enumeration_match_the_implementation() {
    for record in &check_oracle_equivalence() {
        report(record);
    }
}
