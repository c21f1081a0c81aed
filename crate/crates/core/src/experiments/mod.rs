//! Data generation, training loops and repeated-trial evaluation for the
//! sorting and synthetic nearest-neighbour tasks.

mod knn;
mod metrics;
mod output;
mod sorting;

pub use knn::{
    generate_knn_instance, overlap, run_knn_repetitions, train_knn, Distortion, KnnInstance, KnnModel, KnnReport,
    KnnTaskConfig, KnnTrial, KnnWorld,
};
pub use metrics::{evaluate_matching, score_matchings, MetricsReport, SequenceScore, TrialRecord};
pub use output::{
    write_curves_csv, write_json, write_trials_csv, CurveRow, CURVE_COLUMNS, SCHEMA_VERSION, TRIAL_COLUMNS,
};
pub use sorting::{
    generate_sorting_instance, run_sorting_repetitions, sorting_label, train_sorting, ScoreInput, SortingInstance,
    SortingLoss, SortingModel, SortingReport, SortingTaskConfig, SortingTrial,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the perturbation scale is obtained during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum SigmaMode {
    /// `σ_v(x)` from a softplus network trained alongside the scores.
    Learned,
    /// A constant positive `σ`.
    Fixed(f64),
    /// No perturbation at all: plain direct loss minimization.
    Zero,
}

impl SigmaMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SigmaMode::Fixed(v) if !(v > 0.0 && v.is_finite()) => Err(Error::InvalidParameter(format!(
                "fixed sigma must be positive and finite, got {v}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SigmaMode::Learned => "learned".into(),
            SigmaMode::Fixed(v) => format!("fixed({v})"),
            SigmaMode::Zero => "zero".into(),
        }
    }
}

/// Independent RNG streams inside one trial.
pub mod streams {
    pub const DATA: u64 = 0;
    pub const INIT: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const TEST: u64 = 3;
    pub const CHANCE: u64 = 4;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` under `master`.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    splitmix64(master ^ splitmix64(trial as u64))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Run `trial(index, seed)` for every index, in parallel unless
/// `workers == Some(1)`. Results come back in index order and failures are
/// tagged with their trial index.
pub fn run_trials<T, F>(master_seed: u64, trials: usize, workers: Option<usize>, trial: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    let tagged = |i: usize| {
        trial(i, trial_seed(master_seed, i)).map_err(|e| match e {
            e @ Error::Trial { .. } => e,
            other => Error::Trial { trial: i, reason: other.to_string() },
        })
    };
    match workers {
        Some(1) => (0..trials).map(tagged).collect(),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| (0..trials).into_par_iter().map(tagged).collect()),
            Err(_) => (0..trials).map(tagged).collect(),
        },
        None => (0..trials).into_par_iter().map(tagged).collect(),
    }
}

/// Trials that finished, plus `(index, reason)` for those that did not.
/// Fails only when no trial finished.
pub fn run_surviving_trials<T, F>(
    master_seed: u64,
    trials: usize,
    workers: Option<usize>,
    trial: F,
) -> Result<(Vec<T>, Vec<TrialFailure>)>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    let mut done = Vec::new();
    let mut failed = Vec::new();
    for (i, r) in run_trials(master_seed, trials, workers, trial).into_iter().enumerate() {
        match r {
            Ok(t) => done.push(t),
            Err(e) => failed.push(TrialFailure { trial_id: i, reason: e.to_string() }),
        }
    }
    match failed.first() {
        Some(first) if done.is_empty() => Err(Error::Trial { trial: first.trial_id, reason: first.reason.clone() }),
        _ => Ok((done, failed)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial_id: usize,
    pub reason: String,
}

/// [`run_trials`] that fails on the lowest-indexed failing trial.
pub fn run_repetitions<T, F>(master_seed: u64, trials: usize, workers: Option<usize>, trial: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    run_trials(master_seed, trials, workers, trial).into_iter().collect()
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Population standard deviation.
pub(crate) fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Standard error of the mean from the sample standard deviation.
pub(crate) fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..100).map(|i| trial_seed(7, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
        assert_eq!(trial_seed(7, 3), seeds[3]);
        assert_ne!(trial_seed(8, 3), seeds[3]);
    }

    #[test]
    fn streams_differ() {
        let a: u64 = stream_rng(1, streams::DATA).random();
        let b: u64 = stream_rng(1, streams::NOISE).random();
        assert_ne!(a, b);
        assert_eq!(a, stream_rng(1, streams::DATA).random::<u64>());
    }

    #[test]
    fn repetitions_are_ordered_and_deterministic() {
        let f = |i: usize, s: u64| Ok((i, stream_rng(s, 0).random::<u32>()));
        let par = run_repetitions(5, 16, None, f).unwrap();
        let seq = run_repetitions(5, 16, Some(1), f).unwrap();
        assert_eq!(par, seq);
        assert!(par.iter().enumerate().all(|(i, r)| r.0 == i));
    }

    #[test]
    fn failures_carry_trial_index() {
        let r: Result<Vec<()>> = run_repetitions(0, 5, Some(2), |i, _| {
            if i >= 3 {
                Err(Error::NonFinite("loss".into()))
            } else {
                Ok(())
            }
        });
        assert!(matches!(r, Err(Error::Trial { trial: 3, .. })));
        assert!(run_repetitions(0, 0, None, |_, _| Ok(())).is_err());
    }

    #[test]
    fn surviving_trials_keep_partial_results() {
        let f = |i: usize, _| if i == 1 { Err(Error::NonFinite("loss".into())) } else { Ok(i) };
        let (done, failed) = run_surviving_trials(0, 3, Some(1), f).unwrap();
        assert_eq!(done, vec![0, 2]);
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].trial_id, 1);
        let all_bad = run_surviving_trials(0, 2, Some(1), |_, _| -> Result<()> { Err(Error::NonFinite("x".into())) });
        assert!(matches!(all_bad, Err(Error::Trial { trial: 0, .. })));
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(population_std(&[1.0, 1.0]), 0.0);
        assert!((population_std(&[0.0, 2.0]) - 1.0).abs() < 1e-15);
        assert!((standard_error(&[0.0, 2.0]) - 1.0).abs() < 1e-15);
        assert!(SigmaMode::Fixed(0.0).validate().is_err());
        assert!(SigmaMode::Fixed(1.0).validate().is_ok());
    }
}
