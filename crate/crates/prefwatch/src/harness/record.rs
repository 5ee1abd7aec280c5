//! On-disk run records: a versioned per-step CSV and a JSON summary.
//!
//! Numbers are written with Rust's shortest round-trip float formatting, so
//! reading a record back reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// First line of every steps file; readers reject anything else.
pub const CSV_VERSION_TAG: &str = "# prefwatch-v1";

pub const STEPS_FILE: &str = "steps.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("record io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("record csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("record json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported steps file: expected leading `{CSV_VERSION_TAG}` line, found {0:?}")]
    Version(String),
}

/// One simulation step. Measure columns hold the per-step increment and the
/// running total; absent entries mean the measure was not requested or the
/// quantity is undefined at this step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub t: usize,
    pub state: usize,
    pub action: usize,
    pub br_inc: Option<f64>,
    pub br_cum: Option<f64>,
    pub klbp_inc: Option<f64>,
    pub klbp_cum: Option<f64>,
    pub l2_inc: Option<f64>,
    pub l2_cum: Option<f64>,
    pub linf_inc: Option<f64>,
    pub linf_cum: Option<f64>,
    /// Probability floor `min_a min(p_t(a), p*(a))` at the visited state.
    pub kappa: Option<f64>,
    /// Concentration radius at this step.
    pub radius: Option<f64>,
    /// Estimate-error term of the recovery bound at this step.
    pub f_term: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub seed: u64,
    pub horizon: usize,
    pub stateful: bool,
    /// First step with full action support (stateless runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exploration_time: Option<usize>,
    /// Per-state first steps with full action support (stateful runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exploration_time_per_state: Option<Vec<Option<usize>>>,
    /// Final value of each requested measure.
    pub final_measures: BTreeMap<String, f64>,
    /// Realized regret of the learner: action-gap regret for bandits,
    /// expected policy regret for MDPs.
    pub measured_regret: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<StepRow>,
    pub summary: RunSummary,
}

impl RunRecord {
    /// Write `steps.csv` and `summary.json` into `dir`, creating it.
    pub fn write_to(&self, dir: &Path) -> Result<(), RecordError> {
        fs::create_dir_all(dir)?;
        write_steps(&self.rows, &dir.join(STEPS_FILE))?;
        write_summary(&self.summary, &dir.join(SUMMARY_FILE))?;
        Ok(())
    }

    pub fn read_from(dir: &Path) -> Result<Self, RecordError> {
        Ok(Self {
            rows: read_steps(&dir.join(STEPS_FILE))?,
            summary: read_summary(&dir.join(SUMMARY_FILE))?,
        })
    }
}

pub fn write_steps(rows: &[StepRow], path: &Path) -> Result<(), RecordError> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "{CSV_VERSION_TAG}")?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_steps(path: &Path) -> Result<Vec<StepRow>, RecordError> {
    let text = fs::read_to_string(path)?;
    let first = text.lines().next().unwrap_or_default();
    if first != CSV_VERSION_TAG {
        return Err(RecordError::Version(first.to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub fn write_summary(summary: &RunSummary, path: &Path) -> Result<(), RecordError> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<RunSummary, RecordError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<StepRow> {
        vec![
            StepRow {
                t: 1,
                state: 0,
                action: 2,
                br_inc: Some(0.1),
                br_cum: Some(0.1),
                klbp_inc: None,
                klbp_cum: None,
                l2_inc: Some(1.0 / 3.0),
                l2_cum: Some(1.0 / 3.0),
                linf_inc: Some(0.2),
                linf_cum: Some(0.2),
                kappa: None,
                radius: None,
                f_term: None,
            },
            StepRow {
                t: 2,
                state: 1,
                action: 0,
                br_inc: Some(0.0),
                br_cum: Some(0.1),
                klbp_inc: None,
                klbp_cum: None,
                l2_inc: Some(0.7120467811865476),
                l2_cum: Some(1.0404401145198808),
                linf_inc: Some(0.5),
                linf_cum: Some(0.7),
                kappa: Some(0.12344999999999999),
                radius: Some(0.40728490372470294),
                f_term: Some(2e-300),
            },
        ]
    }

    #[test]
    fn steps_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(STEPS_FILE);
        let rows = sample_rows();
        write_steps(&rows, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(CSV_VERSION_TAG));
        let back = read_steps(&path).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn reader_rejects_untagged_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(STEPS_FILE);
        fs::write(&path, "t,state,action\n1,0,0\n").unwrap();
        match read_steps(&path) {
            Err(RecordError::Version(_)) => {}
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn summary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(SUMMARY_FILE);
        let summary = RunSummary {
            config_hash: "0123456789abcdef".into(),
            seed: 42,
            horizon: 100,
            stateful: true,
            exploration_time: None,
            exploration_time_per_state: Some(vec![Some(5), None, Some(17)]),
            final_measures: BTreeMap::from([
                ("br".to_string(), 1.5),
                ("linf".to_string(), 0.3333333333333333),
            ]),
            measured_regret: 2.25,
            wall_time_s: 0.125,
        };
        write_summary(&summary, &path).unwrap();
        let back = read_summary(&path).unwrap();
        assert_eq!(summary, back);
    }
}
