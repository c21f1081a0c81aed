use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{report_from_scores, score_matchings, SequenceScore};
use super::{run_surviving_trials, stream_rng, TrialFailure, streams, CurveRow, MetricsReport, SigmaMode, TrialRecord};
use crate::error::{Error, Result};
use crate::estimator::{escalating_gradient_signal, predict, EpsilonSchedule, SignalAverage};
use crate::gumbel::{GumbelSampler, PerturbationField};
use crate::nn::{Activation, DenseNet, Gradients, OptimizerKind, OptimizerState, Tape};
use crate::solvers::{
    linearize_matching_loss, linearize_matching_placement_loss, matching_placement_loss, matching_quadratic_loss,
    ExactSolver, LinearLossCoefficients,
};
use crate::structure::{FamilyKind, ScoreTable, Structure};

/// What the score network sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreInput {
    /// One shared `1 → hidden → d` net per element; row `i` of the table is
    /// the net applied to `x_i`.
    PerElement,
    /// A single `d → hidden → d²` net over the whole sequence.
    RawSequence,
}

/// Training loss for the sorting task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SortingLoss {
    /// [`matching_quadratic_loss`], rows compared through `x` indexed by column.
    RowQuadratic,
    /// [`matching_placement_loss`], positions compared by the value placed there.
    Placement,
}

impl SortingLoss {
    fn linearize(self, x: &[f64], y: &Structure) -> Result<LinearLossCoefficients> {
        match self {
            SortingLoss::RowQuadratic => linearize_matching_loss(x, y),
            SortingLoss::Placement => linearize_matching_placement_loss(x, y),
        }
    }

    fn evaluate(self, x: &[f64], y: &Structure, y_hat: &Structure) -> Result<f64> {
        match self {
            SortingLoss::RowQuadratic => matching_quadratic_loss(x, y, y_hat),
            SortingLoss::Placement => matching_placement_loss(x, y, y_hat),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SortingTaskConfig {
    pub d: usize,
    pub train_sequences: usize,
    pub test_sequences: usize,
    /// Sequences per optimizer step.
    pub batch_size: usize,
    pub epochs_max: usize,
    pub patience: usize,
    pub perturbations: usize,
    pub epsilon: f64,
    pub escalation_factor: f64,
    /// Escalation bound; `None` means ten times `epsilon`.
    pub epsilon_cap: Option<f64>,
    pub mu_lr: f64,
    pub sigma_lr: f64,
    pub hidden: usize,
    pub sigma_mode: SigmaMode,
    pub score_input: ScoreInput,
    pub loss: SortingLoss,
    pub seed: u64,
}

impl Default for SortingTaskConfig {
    fn default() -> Self {
        Self {
            d: 5,
            train_sequences: 10,
            test_sequences: 1,
            batch_size: 10,
            epochs_max: 2000,
            patience: 50,
            perturbations: 5,
            epsilon: -12.0,
            escalation_factor: 1.10,
            epsilon_cap: None,
            mu_lr: 0.1,
            sigma_lr: 1e-6,
            hidden: 32,
            sigma_mode: SigmaMode::Learned,
            score_input: ScoreInput::PerElement,
            loss: SortingLoss::Placement,
            seed: 0,
        }
    }
}

impl SortingTaskConfig {
    pub fn with_d(d: usize) -> Self {
        Self { d, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidParameter(format!("sequence length d must be >= 2, got {}", self.d)));
        }
        if self.train_sequences == 0 || self.test_sequences == 0 || self.batch_size == 0 || self.perturbations == 0 || self.hidden == 0 {
            return Err(Error::InvalidParameter(
                "sequence counts, batch size, perturbations and hidden width must be >= 1".into(),
            ));
        }
        if self.epsilon == 0.0 {
            return Err(Error::InvalidParameter("epsilon must be nonzero".into()));
        }
        if !(self.mu_lr > 0.0) || !(self.sigma_lr >= 0.0) {
            return Err(Error::InvalidParameter("learning rates must be positive".into()));
        }
        self.sigma_mode.validate()?;
        self.schedule().map(|_| ())
    }

    pub fn schedule(&self) -> Result<EpsilonSchedule> {
        EpsilonSchedule::new(self.epsilon, self.escalation_factor, self.epsilon_cap.unwrap_or(10.0 * self.epsilon))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SortingInstance {
    pub x: Vec<f64>,
    pub y: Structure,
}

/// Matching that sends element `i` to the position of `x_i` in ascending
/// order; equal values keep their index order.
pub fn sorting_label(x: &[f64]) -> Structure {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut perm = vec![0; x.len()];
    for (pos, &i) in order.iter().enumerate() {
        perm[i] = pos;
    }
    Structure::Matching(perm)
}

/// Uniform `[0, 1)` sequence with its sorting matching.
pub fn generate_sorting_instance<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<SortingInstance> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("sequence length d must be >= 2, got {d}")));
    }
    let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let y = sorting_label(&x);
    Ok(SortingInstance { x, y })
}

/// Score network plus, in learned mode, the noise network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SortingModel {
    pub d: usize,
    pub score_input: ScoreInput,
    pub sigma_mode: SigmaMode,
    pub mu_net: DenseNet,
    pub sigma_net: Option<DenseNet>,
}

impl SortingModel {
    pub fn init<R: Rng + ?Sized>(config: &SortingTaskConfig, rng: &mut R) -> Result<Self> {
        let d = config.d;
        let dims = match config.score_input {
            ScoreInput::PerElement => [1, config.hidden, d],
            ScoreInput::RawSequence => [d, config.hidden, d * d],
        };
        let mu_net = DenseNet::new(&dims, &[Activation::Relu, Activation::Identity], rng)?;
        let sigma_net = match config.sigma_mode {
            SigmaMode::Learned => Some(DenseNet::new(&[d, 1], &[Activation::Softplus], rng)?),
            _ => None,
        };
        Ok(Self { d, score_input: config.score_input, sigma_mode: config.sigma_mode, mu_net, sigma_net })
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::Shape(format!("sequence of length {} for a d={} model", x.len(), self.d)));
        }
        Ok(())
    }

    fn scores_with_tapes(&self, x: &[f64]) -> Result<(ScoreTable, Vec<Tape>)> {
        self.check_input(x)?;
        match self.score_input {
            ScoreInput::PerElement => {
                let mut entries = Vec::with_capacity(self.d * self.d);
                let mut tapes = Vec::with_capacity(self.d);
                for &xi in x {
                    let (row, tape) = self.mu_net.forward(&[xi])?;
                    entries.extend(row);
                    tapes.push(tape);
                }
                Ok((ScoreTable::matching(self.d, entries)?, tapes))
            }
            ScoreInput::RawSequence => {
                let (out, tape) = self.mu_net.forward(x)?;
                Ok((ScoreTable::matching(self.d, out)?, vec![tape]))
            }
        }
    }

    /// Score table `μ(x, ·)`.
    pub fn scores(&self, x: &[f64]) -> Result<ScoreTable> {
        Ok(self.scores_with_tapes(x)?.0)
    }

    fn sigma_with_tape(&self, x: &[f64]) -> Result<(f64, Option<Tape>)> {
        match (self.sigma_mode, &self.sigma_net) {
            (SigmaMode::Learned, Some(net)) => {
                let (out, tape) = net.forward(x)?;
                Ok((out[0], Some(tape)))
            }
            (SigmaMode::Learned, None) => Err(Error::InvalidParameter("learned sigma without a network".into())),
            (SigmaMode::Fixed(v), _) => Ok((v, None)),
            (SigmaMode::Zero, _) => Ok((0.0, None)),
        }
    }

    /// Perturbation scale used during training.
    pub fn sigma(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.sigma_with_tape(x)?.0)
    }

    /// Test-time prediction: argmax of the scores, no perturbation.
    pub fn predict(&self, x: &[f64]) -> Result<Structure> {
        let kind = FamilyKind::Matching { d: self.d };
        predict(&self.scores(x)?, &PerturbationField::zeros_for(kind), 0.0, &ExactSolver)
    }

    fn accumulate_scores(&self, tapes: &[Tape], cotangent: &[f64], grads: &mut Gradients) -> Result<()> {
        match self.score_input {
            ScoreInput::PerElement => {
                for (i, tape) in tapes.iter().enumerate() {
                    let row = &cotangent[i * self.d..(i + 1) * self.d];
                    if row.iter().any(|&c| c != 0.0) {
                        grads.add_scaled(&self.mu_net.backward(tape, row)?, 1.0);
                    }
                }
            }
            ScoreInput::RawSequence => grads.add_scaled(&self.mu_net.backward(&tapes[0], cotangent)?, 1.0),
        }
        Ok(())
    }
}

/// Outcome of one training run.
#[derive(Debug, Clone, Serialize)]
pub struct SortingTrial {
    pub record: TrialRecord,
    pub curve: Vec<CurveRow>,
    pub test_scores: Vec<SequenceScore>,
    pub test_predictions: Vec<Structure>,
    pub test_labels: Vec<Structure>,
    pub model: SortingModel,
}

fn fraction_correct(a: &Structure, b: &Structure) -> f64 {
    match (a.as_permutation(), b.as_permutation()) {
        (Some(p), Some(q)) => p.iter().zip(q).filter(|(u, v)| u == v).count() as f64 / p.len() as f64,
        _ => 0.0,
    }
}

/// Train one model on fresh data seeded by `config.seed` and evaluate it on
/// fresh test sequences.
pub fn train_sorting(config: &SortingTaskConfig) -> Result<SortingTrial> {
    config.validate()?;
    let d = config.d;
    let kind = FamilyKind::Matching { d };
    let mut data_rng = stream_rng(config.seed, streams::DATA);
    let train: Vec<SortingInstance> =
        (0..config.train_sequences).map(|_| generate_sorting_instance(&mut data_rng, d)).collect::<Result<_>>()?;
    let mut test_rng = stream_rng(config.seed, streams::TEST);
    let test: Vec<SortingInstance> =
        (0..config.test_sequences).map(|_| generate_sorting_instance(&mut test_rng, d)).collect::<Result<_>>()?;

    let mut model = SortingModel::init(config, &mut stream_rng(config.seed, streams::INIT))?;
    let mut mu_opt = OptimizerState::new(OptimizerKind::adam(config.mu_lr), &model.mu_net);
    let mut sigma_opt = model.sigma_net.as_ref().map(|n| OptimizerState::new(OptimizerKind::sgd(config.sigma_lr), n));
    let mut sampler = GumbelSampler::new(config.seed, streams::NOISE);
    let mut schedule = config.schedule()?;
    let lins = train.iter().map(|s| config.loss.linearize(&s.x, &s.y)).collect::<Result<Vec<_>>>()?;
    let draws = if config.sigma_mode == SigmaMode::Zero { 1 } else { config.perturbations };
    let inv_train = 1.0 / train.len() as f64;

    let mut curve = Vec::new();
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let (mut total_escalations, mut total_ties) = (0u64, 0u64);
    let mut final_loss = f64::NAN;
    let mut final_sigma = 0.0;

    for epoch in 0..config.epochs_max {
        let (mut loss_sum, mut sigma_sum, mut star_ok, mut eps_ok) = (0.0, 0.0, 0.0, 0.0);
        let (mut escalations, mut ties) = (0u64, 0u64);

        for (batch, lin_batch) in train.chunks(config.batch_size).zip(lins.chunks(config.batch_size)) {
            let mut mu_grads = Gradients::zeros_like(&model.mu_net);
            let mut sigma_grads = model.sigma_net.as_ref().map(Gradients::zeros_like);
            for (inst, lin) in batch.iter().zip(lin_batch) {
                let (table, tapes) = model.scores_with_tapes(&inst.x)?;
                let (sigma, sigma_tape) = model.sigma_with_tape(&inst.x)?;
                if !sigma.is_finite() {
                    return Err(Error::NonFinite(format!("sigma at epoch {epoch}")));
                }
                sigma_sum += sigma;
                let mut signals = Vec::with_capacity(draws);
                for _ in 0..draws {
                    let field = if draws == 1 && sigma == 0.0 {
                        PerturbationField::zeros_for(kind)
                    } else {
                        sampler.sample_field_for(kind)?
                    };
                    let es = escalating_gradient_signal(
                        &table,
                        &field,
                        sigma,
                        lin,
                        &mut schedule,
                        &ExactSolver,
                        &inst.y,
                        |y, y_hat| config.loss.evaluate(&inst.x, y, y_hat),
                    )?;
                    escalations += es.escalations as u64;
                    star_ok += fraction_correct(&es.signal.y_star, &inst.y);
                    eps_ok += fraction_correct(&es.signal.y_star_eps, &inst.y);
                    signals.push(es.signal);
                }
                let avg = SignalAverage::from_signals(&signals, d * d);
                ties += avg.discarded as u64;
                loss_sum += avg.mean_loss;
                model.accumulate_scores(&tapes, &avg.score_cotangent, &mut mu_grads)?;
                if let (Some(net), Some(tape), Some(g)) = (&model.sigma_net, &sigma_tape, sigma_grads.as_mut()) {
                    if avg.sigma_cotangent != 0.0 {
                        g.add_scaled(&net.backward(tape, &[avg.sigma_cotangent])?, 1.0);
                    }
                }
            }
            if !loss_sum.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
            }
            let inv = 1.0 / batch.len() as f64;
            mu_grads.scale(inv);
            mu_opt.step(&mut model.mu_net, &mu_grads)?;
            if let (Some(net), Some(opt), Some(mut g)) = (model.sigma_net.as_mut(), sigma_opt.as_mut(), sigma_grads) {
                g.scale(inv);
                opt.step(net, &g)?;
            }
        }
        let epoch_loss = loss_sum * inv_train;

        let signals_seen = (train.len() * draws) as f64;
        final_loss = epoch_loss;
        final_sigma = sigma_sum * inv_train;
        total_escalations += escalations;
        total_ties += ties;
        curve.push(CurveRow {
            trial_id: 0,
            epoch,
            train_loss: epoch_loss,
            pct_correct_y_star: 100.0 * star_ok / signals_seen,
            pct_correct_y_star_eps: 100.0 * eps_ok / signals_seen,
            sigma_mean: final_sigma,
            epsilon: schedule.current,
            escalations,
            ties,
        });

        if epoch_loss < best {
            best = epoch_loss;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    let test_predictions = test.iter().map(|s| model.predict(&s.x)).collect::<Result<Vec<_>>>()?;
    let test_labels: Vec<Structure> = test.iter().map(|s| s.y.clone()).collect();
    let test_scores = score_matchings(&test_predictions, &test_labels)?;
    let n_test = test_scores.len() as f64;
    let record = TrialRecord {
        trial_id: 0,
        seed: config.seed,
        d_or_nk: format!("d{d}"),
        epochs_run: curve.len(),
        final_train_loss: final_loss,
        prop_any_wrong: test_scores.iter().filter(|s| s.any_wrong()).count() as f64 / n_test,
        prop_wrong: test_scores.iter().map(|s| s.prop_wrong()).sum::<f64>() / n_test,
        sigma_final: final_sigma,
        escalations: total_escalations,
        ties: total_ties,
    };
    Ok(SortingTrial { record, curve, test_scores, test_predictions, test_labels, model })
}

/// Aggregate of repeated sorting trials.
#[derive(Debug, Clone, Serialize)]
pub struct SortingReport {
    pub metrics: MetricsReport,
    pub trials: Vec<SortingTrial>,
    pub failures: Vec<TrialFailure>,
}

impl SortingReport {
    pub fn curves(&self) -> Vec<CurveRow> {
        self.trials.iter().flat_map(|t| t.curve.iter().cloned()).collect()
    }

    /// Last-epoch percent of correct `y*` entries per trial.
    pub fn final_pct_correct_y_star(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.curve.last().map_or(0.0, |c| c.pct_correct_y_star)).collect()
    }
}

/// `trials` independent runs; trial `i` uses the seed derived from
/// `(config.seed, i)`, so different σ modes share data and initialization.
pub fn run_sorting_repetitions(
    config: &SortingTaskConfig,
    trials: usize,
    workers: Option<usize>,
) -> Result<SortingReport> {
    config.validate()?;
    let (outcomes, failures) = run_surviving_trials(config.seed, trials, workers, |i, seed| {
        let mut t = train_sorting(&SortingTaskConfig { seed, ..config.clone() })?;
        t.record.trial_id = i;
        t.curve.iter_mut().for_each(|c| c.trial_id = i);
        Ok(t)
    })?;
    let scores: Vec<SequenceScore> = outcomes.iter().flat_map(|t| t.test_scores.iter().copied()).collect();
    let metrics = report_from_scores(&scores, outcomes.iter().map(|t| t.record.clone()).collect());
    Ok(SortingReport { metrics, trials: outcomes, failures })
}
