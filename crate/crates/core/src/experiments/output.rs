//! CSV and JSON report files.
//!
//! Trials CSV (one row per trial): see [`TRIAL_COLUMNS`]. Proportions are
//! fractions in `[0, 1]`.
//!
//! Curves CSV (one row per trial and epoch): see [`CURVE_COLUMNS`]. The
//! percent-correct columns count rows matched to their true column (sorting)
//! or true items recovered (top-k), in percent.
//!
//! Summary JSON: an object carrying `schema_version`, the effective run
//! configuration and the aggregate report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiments::TrialRecord;

pub const SCHEMA_VERSION: u32 = 1;

pub const TRIAL_COLUMNS: [&str; 10] = [
    "trial_id",
    "seed",
    "d_or_nk",
    "epochs_run",
    "final_train_loss",
    "prop_any_wrong",
    "prop_wrong",
    "sigma_final",
    "escalations",
    "ties",
];

pub const CURVE_COLUMNS: [&str; 9] = [
    "trial_id",
    "epoch",
    "train_loss",
    "pct_correct_y_star",
    "pct_correct_y_star_eps",
    "sigma_mean",
    "epsilon",
    "escalations",
    "ties",
];

/// One epoch of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub trial_id: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub pct_correct_y_star: f64,
    pub pct_correct_y_star_eps: f64,
    pub sigma_mean: f64,
    pub epsilon: f64,
    pub escalations: u64,
    pub ties: u64,
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trials_csv(path: &Path, rows: &[TrialRecord]) -> Result<()> {
    write_rows(path, rows, &TRIAL_COLUMNS)
}

pub fn write_curves_csv(path: &Path, rows: &[CurveRow]) -> Result<()> {
    write_rows(path, rows, &CURVE_COLUMNS)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trials_csv_has_fixed_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let row = TrialRecord {
            trial_id: 0,
            seed: 42,
            d_or_nk: "d5".into(),
            epochs_run: 10,
            final_train_loss: 0.25,
            prop_any_wrong: 0.0,
            prop_wrong: 0.0,
            sigma_final: 0.7,
            escalations: 3,
            ties: 0,
        };
        write_trials_csv(&path, &[row.clone(), row]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRIAL_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "0,42,d5,10,0.25,0.0,0.0,0.7,3,0");
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn empty_curves_still_have_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_curves_csv(&path, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().trim(), CURVE_COLUMNS.join(","));
    }
}
