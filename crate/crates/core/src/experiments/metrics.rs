use serde::{Deserialize, Serialize};

use super::{mean, population_std};
use crate::error::{Error, Result};
use crate::structure::Structure;

/// Misplacement count of one predicted matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SequenceScore {
    pub wrong: usize,
    pub len: usize,
}

impl SequenceScore {
    pub fn any_wrong(&self) -> bool {
        self.wrong > 0
    }

    pub fn prop_wrong(&self) -> f64 {
        self.wrong as f64 / self.len as f64
    }
}

/// One row of the trials CSV. Proportions are fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub seed: u64,
    pub d_or_nk: String,
    pub epochs_run: usize,
    pub final_train_loss: f64,
    pub prop_any_wrong: f64,
    pub prop_wrong: f64,
    pub sigma_final: f64,
    pub escalations: u64,
    pub ties: u64,
}

/// Test-set measures aggregated over every test sequence of every trial;
/// all figures are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sequences: usize,
    pub percent_zero_prop_any_wrong: f64,
    pub prop_wrong_mean: f64,
    /// Population standard deviation across test sequences.
    pub prop_wrong_std: f64,
    pub tie_count: u64,
    pub escalation_count: u64,
    pub trials: Vec<TrialRecord>,
}

fn score(prediction: &Structure, label: &Structure) -> Result<SequenceScore> {
    let (Some(p), Some(l)) = (prediction.as_permutation(), label.as_permutation()) else {
        return Err(Error::Shape("matching metrics need matchings".into()));
    };
    if p.len() != l.len() {
        return Err(Error::Shape(format!("prediction of size {} for label of size {}", p.len(), l.len())));
    }
    Ok(SequenceScore { wrong: p.iter().zip(l).filter(|(a, b)| a != b).count(), len: l.len() })
}

/// Score each prediction against its label.
pub fn score_matchings(predictions: &[Structure], labels: &[Structure]) -> Result<Vec<SequenceScore>> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    predictions.iter().zip(labels).map(|(p, l)| score(p, l)).collect()
}

/// Percent of perfectly sorted sequences and mean/std of the percent of
/// misplaced positions.
pub fn evaluate_matching(predictions: &[Structure], labels: &[Structure]) -> Result<MetricsReport> {
    let scores = score_matchings(predictions, labels)?;
    Ok(report_from_scores(&scores, Vec::new()))
}

pub(crate) fn report_from_scores(scores: &[SequenceScore], trials: Vec<TrialRecord>) -> MetricsReport {
    let wrong: Vec<f64> = scores.iter().map(|s| 100.0 * s.prop_wrong()).collect();
    let perfect = scores.iter().filter(|s| !s.any_wrong()).count();
    MetricsReport {
        sequences: scores.len(),
        percent_zero_prop_any_wrong: if scores.is_empty() { 0.0 } else { 100.0 * perfect as f64 / scores.len() as f64 },
        prop_wrong_mean: mean(&wrong),
        prop_wrong_std: population_std(&wrong),
        tie_count: trials.iter().map(|t| t.ties).sum(),
        escalation_count: trials.iter().map(|t| t.escalations).sum(),
        trials,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_exact() {
        let y = vec![Structure::Matching(vec![2, 0, 1]), Structure::identity_matching(3)];
        let r = evaluate_matching(&y, &y).unwrap();
        assert_eq!((r.percent_zero_prop_any_wrong, r.prop_wrong_mean, r.prop_wrong_std), (100.0, 0.0, 0.0));
    }

    #[test]
    fn one_transposition_of_ten() {
        let label = Structure::identity_matching(10);
        let mut swapped: Vec<usize> = (0..10).collect();
        swapped.swap(3, 7);
        let r = evaluate_matching(&[label.clone(), Structure::Matching(swapped)], &[label.clone(), label]).unwrap();
        assert_eq!(r.percent_zero_prop_any_wrong, 50.0);
        assert!((r.prop_wrong_mean - 10.0).abs() < 1e-12);
        assert!((r.prop_wrong_std - 10.0).abs() < 1e-12);
    }

    #[test]
    fn reversal_counts_positions() {
        let label = Structure::identity_matching(5);
        let rev = Structure::Matching(vec![4, 3, 2, 1, 0]);
        let r = evaluate_matching(&[rev], &[label]).unwrap();
        // the middle element stays in place
        assert!((r.prop_wrong_mean - 80.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        let y = Structure::identity_matching(3);
        assert!(evaluate_matching(std::slice::from_ref(&y), &[]).is_err());
        assert!(evaluate_matching(&[y], &[Structure::identity_matching(4)]).is_err());
    }
}
