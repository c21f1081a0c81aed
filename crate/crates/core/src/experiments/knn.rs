//! Top-k nearest neighbours under a distorted metric.
//!
//! Points come from a Gaussian mixture in a low-dimensional raw space and the
//! true neighbours of a query are the `k` candidates closest in that space.
//! The networks only see a fixed distortion of every point: anisotropic
//! scaling, extra nuisance coordinates and a random rotation. The embedding
//! has to learn a metric under which the raw neighbours come out on top.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{mean, run_surviving_trials, TrialFailure, standard_error, stream_rng, streams, CurveRow, SigmaMode, TrialRecord};
use crate::error::{Error, Result};
use crate::estimator::{escalating_gradient_signal, predict, EpsilonSchedule, SignalAverage};
use crate::gumbel::{GumbelSampler, PerturbationField};
use crate::nn::{Activation, DenseNet, Gradients, OptimizerKind, OptimizerState, Tape};
use crate::solvers::{knn_linear_loss, linearize_knn_loss, solve_topk, ExactSolver};
use crate::structure::{FamilyKind, ScoreTable, Structure};

/// Shape of the fixed distortion between raw points and network inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Distortion {
    pub rotate: bool,
    /// Ratio between the largest and smallest raw-axis scale.
    pub anisotropy: f64,
    /// Number of appended nuisance coordinates.
    pub nuisance_dims: usize,
    /// Standard deviation of the nuisance coordinates.
    pub noise_level: f64,
}

impl Default for Distortion {
    fn default() -> Self {
        Self { rotate: true, anisotropy: 4.0, nuisance_dims: 6, noise_level: 1.0 }
    }
}

impl Distortion {
    pub fn none() -> Self {
        Self { rotate: false, anisotropy: 1.0, nuisance_dims: 0, noise_level: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnTaskConfig {
    pub n: usize,
    pub k: usize,
    pub input_dim: usize,
    pub clusters: usize,
    /// Standard deviation of the cluster centres.
    pub cluster_scale: f64,
    /// Within-cluster standard deviation.
    pub cluster_spread: f64,
    pub distortion: Distortion,
    pub embed_dim: usize,
    pub hidden: usize,
    pub train_instances: usize,
    pub test_instances: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub perturbations: usize,
    pub epsilon: f64,
    pub escalation_factor: f64,
    pub epsilon_cap: f64,
    pub lr: f64,
    pub sigma_lr: f64,
    pub sigma_mode: SigmaMode,
    /// Random k-subsets drawn per test instance for the chance baseline.
    pub chance_draws: usize,
    pub seed: u64,
}

impl Default for KnnTaskConfig {
    fn default() -> Self {
        Self {
            n: 20,
            k: 3,
            input_dim: 2,
            clusters: 4,
            cluster_scale: 2.0,
            cluster_spread: 0.7,
            distortion: Distortion::default(),
            embed_dim: 4,
            hidden: 32,
            train_instances: 100,
            test_instances: 50,
            epochs: 220,
            batch_size: 10,
            perturbations: 5,
            epsilon: -0.2,
            escalation_factor: 1.10,
            epsilon_cap: -0.9999,
            lr: 0.003,
            sigma_lr: 1e-6,
            sigma_mode: SigmaMode::Learned,
            chance_draws: 200,
            seed: 0,
        }
    }
}

impl KnnTaskConfig {
    pub fn feature_dim(&self) -> usize {
        self.input_dim + self.distortion.nuisance_dims
    }

    pub fn kind(&self) -> FamilyKind {
        FamilyKind::TopK { n: self.n, k: self.k }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(Error::InvalidParameter(format!("need 1 <= k <= n, got n={}, k={}", self.n, self.k)));
        }
        if self.input_dim == 0 || self.clusters == 0 || self.embed_dim == 0 || self.hidden == 0 {
            return Err(Error::InvalidParameter("dimensions and cluster count must be >= 1".into()));
        }
        if self.train_instances == 0 || self.test_instances == 0 || self.batch_size == 0 || self.perturbations == 0 {
            return Err(Error::InvalidParameter("instance counts, batch size and perturbations must be >= 1".into()));
        }
        if !(self.distortion.anisotropy >= 1.0) || !(self.distortion.noise_level >= 0.0) {
            return Err(Error::InvalidParameter("anisotropy must be >= 1 and noise level >= 0".into()));
        }
        if !(self.cluster_scale >= 0.0) || !(self.cluster_spread > 0.0) {
            return Err(Error::InvalidParameter("cluster scale must be >= 0 and spread > 0".into()));
        }
        if !(self.lr > 0.0) || !(self.sigma_lr >= 0.0) {
            return Err(Error::InvalidParameter("learning rates must be positive".into()));
        }
        self.sigma_mode.validate()?;
        self.schedule().map(|_| ())
    }

    pub fn schedule(&self) -> Result<EpsilonSchedule> {
        if self.epsilon == 0.0 {
            return Err(Error::InvalidParameter("epsilon must be nonzero".into()));
        }
        EpsilonSchedule::new(self.epsilon, self.escalation_factor, self.epsilon_cap)
    }
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Gram–Schmidt on a Gaussian matrix; rows are orthonormal.
fn random_rotation<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while rows.len() < dim {
        let mut v = gaussian_vec(rng, dim, 1.0);
        for r in &rows {
            let dot: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(x, a)| *x -= dot * a);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            rows.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    rows
}

/// The part of the task fixed for a whole trial: mixture centres and the
/// realized distortion map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnnWorld {
    pub centres: Vec<Vec<f64>>,
    pub axis_scales: Vec<f64>,
    pub rotation: Option<Vec<Vec<f64>>>,
    pub distortion: Distortion,
    pub cluster_spread: f64,
}

impl KnnWorld {
    pub fn new<R: Rng + ?Sized>(config: &KnnTaskConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let p = config.input_dim;
        let centres = (0..config.clusters).map(|_| gaussian_vec(rng, p, config.cluster_scale)).collect();
        let a = config.distortion.anisotropy;
        let axis_scales =
            (0..p).map(|j| if p == 1 { 1.0 } else { a.powf(-(j as f64) / (p - 1) as f64) }).collect();
        let rotation = config.distortion.rotate.then(|| random_rotation(rng, config.feature_dim()));
        Ok(Self { centres, axis_scales, rotation, distortion: config.distortion, cluster_spread: config.cluster_spread })
    }

    fn raw_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let c = &self.centres[rng.random_range(0..self.centres.len())];
        c.iter().map(|&m| m + self.cluster_spread * rng.sample::<f64, _>(StandardNormal)).collect()
    }

    /// Network-visible image of a raw point; nuisance coordinates are drawn
    /// fresh from `rng`.
    pub fn distort<R: Rng + ?Sized>(&self, raw: &[f64], rng: &mut R) -> Vec<f64> {
        let mut v: Vec<f64> = raw.iter().zip(&self.axis_scales).map(|(x, s)| x * s).collect();
        v.extend(gaussian_vec(rng, self.distortion.nuisance_dims, self.distortion.noise_level));
        match &self.rotation {
            Some(rot) => rot.iter().map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum()).collect(),
            None => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnnInstance {
    pub query: Vec<f64>,
    pub candidates: Vec<Vec<f64>>,
    pub query_features: Vec<f64>,
    pub candidate_features: Vec<Vec<f64>>,
    /// Raw-space Euclidean distance of each candidate to the query.
    pub distances: Vec<f64>,
    pub y: Structure,
}

/// Draw a query and `n` candidates; the label is the exact raw-space top-k.
pub fn generate_knn_instance<R: Rng + ?Sized>(rng: &mut R, config: &KnnTaskConfig, world: &KnnWorld) -> Result<KnnInstance> {
    let query = world.raw_point(rng);
    let candidates: Vec<Vec<f64>> = (0..config.n).map(|_| world.raw_point(rng)).collect();
    let query_features = world.distort(&query, rng);
    let candidate_features = candidates.iter().map(|c| world.distort(c, rng)).collect();
    let distances: Vec<f64> = candidates
        .iter()
        .map(|c| c.iter().zip(&query).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .collect();
    let neg: Vec<f64> = distances.iter().map(|d| -d).collect();
    let y = solve_topk(&ScoreTable::topk(config.k, neg)?)?.structure;
    Ok(KnnInstance { query, candidates, query_features, candidate_features, distances, y })
}

/// Embedding network scoring each candidate by minus its squared embedded
/// distance to the query, plus the optional noise network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnnModel {
    pub k: usize,
    pub sigma_mode: SigmaMode,
    pub embed: DenseNet,
    pub sigma_net: Option<DenseNet>,
}

struct Embedded {
    query: Vec<f64>,
    query_tape: Tape,
    candidates: Vec<Vec<f64>>,
    tapes: Vec<Tape>,
}

impl KnnModel {
    pub fn init<R: Rng + ?Sized>(config: &KnnTaskConfig, rng: &mut R) -> Result<Self> {
        let embed = DenseNet::new(
            &[config.feature_dim(), config.hidden, config.embed_dim],
            &[Activation::Relu, Activation::Identity],
            rng,
        )?;
        let sigma_net = match config.sigma_mode {
            SigmaMode::Learned => {
                Some(DenseNet::new(&[(config.n + 1) * config.feature_dim(), 1], &[Activation::Softplus], rng)?)
            }
            _ => None,
        };
        Ok(Self { k: config.k, sigma_mode: config.sigma_mode, embed, sigma_net })
    }

    /// A model around a given embedding, without noise network.
    pub fn with_embedding(k: usize, embed: DenseNet) -> Self {
        Self { k, sigma_mode: SigmaMode::Zero, embed, sigma_net: None }
    }

    fn embed_all(&self, inst: &KnnInstance) -> Result<Embedded> {
        let (query, query_tape) = self.embed.forward(&inst.query_features)?;
        let mut candidates = Vec::with_capacity(inst.candidate_features.len());
        let mut tapes = Vec::with_capacity(inst.candidate_features.len());
        for f in &inst.candidate_features {
            let (e, t) = self.embed.forward(f)?;
            candidates.push(e);
            tapes.push(t);
        }
        Ok(Embedded { query, query_tape, candidates, tapes })
    }

    fn table(&self, e: &Embedded) -> Result<ScoreTable> {
        let scores = e
            .candidates
            .iter()
            .map(|c| -c.iter().zip(&e.query).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .collect();
        ScoreTable::topk(self.k, scores)
    }

    pub fn scores(&self, inst: &KnnInstance) -> Result<ScoreTable> {
        self.table(&self.embed_all(inst)?)
    }

    fn sigma_with_tape(&self, inst: &KnnInstance) -> Result<(f64, Option<Tape>)> {
        match (self.sigma_mode, &self.sigma_net) {
            (SigmaMode::Learned, Some(net)) => {
                let mut input = inst.query_features.clone();
                inst.candidate_features.iter().for_each(|f| input.extend_from_slice(f));
                let (out, tape) = net.forward(&input)?;
                Ok((out[0], Some(tape)))
            }
            (SigmaMode::Learned, None) => Err(Error::InvalidParameter("learned sigma without a network".into())),
            (SigmaMode::Fixed(v), _) => Ok((v, None)),
            (SigmaMode::Zero, _) => Ok((0.0, None)),
        }
    }

    /// Noise-free top-k of the embedded scores.
    pub fn predict(&self, inst: &KnnInstance) -> Result<Structure> {
        let table = self.scores(inst)?;
        predict(&table, &PerturbationField::zeros_for(table.kind()), 0.0, &ExactSolver)
    }

    fn accumulate(&self, e: &Embedded, cotangent: &[f64], grads: &mut Gradients) -> Result<()> {
        let mut query_cot = vec![0.0; e.query.len()];
        for ((c, tape), &g) in e.candidates.iter().zip(&e.tapes).zip(cotangent) {
            if g == 0.0 {
                continue;
            }
            let cot: Vec<f64> = c.iter().zip(&e.query).map(|(a, b)| -2.0 * g * (a - b)).collect();
            query_cot.iter_mut().zip(&cot).for_each(|(q, v)| *q -= v);
            grads.add_scaled(&self.embed.backward(tape, &cot)?, 1.0);
        }
        if query_cot.iter().any(|&v| v != 0.0) {
            grads.add_scaled(&self.embed.backward(&e.query_tape, &query_cot)?, 1.0);
        }
        Ok(())
    }
}

/// Fraction of the true neighbours recovered.
pub fn overlap(prediction: &Structure, label: &Structure) -> f64 {
    match (prediction.as_subset(), label.as_subset()) {
        (Some(p), Some(l)) if !l.is_empty() => {
            p.iter().filter(|i| l.binary_search(i).is_ok()).count() as f64 / l.len() as f64
        }
        _ => 0.0,
    }
}

fn mean_overlap(model: &KnnModel, instances: &[KnnInstance]) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut misses = 0usize;
    for inst in instances {
        let o = overlap(&model.predict(inst)?, &inst.y);
        total += o;
        misses += usize::from(o < 1.0);
    }
    let n = instances.len() as f64;
    Ok((total / n, misses as f64 / n))
}

/// Mean overlap of uniformly random k-subsets with the labels.
fn chance_overlap<R: Rng + ?Sized>(rng: &mut R, instances: &[KnnInstance], n: usize, k: usize, draws: usize) -> f64 {
    let mut total = 0.0;
    for inst in instances {
        for _ in 0..draws {
            let subset = Structure::topk_from(sample_indices(rng, n, k).into_vec());
            total += overlap(&subset, &inst.y);
        }
    }
    total / (instances.len() * draws.max(1)) as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct KnnTrial {
    pub record: TrialRecord,
    pub curve: Vec<CurveRow>,
    pub trained_overlap: f64,
    pub untrained_overlap: f64,
    pub chance_overlap: f64,
    pub model: KnnModel,
}

/// Train on fixed instances for `config.epochs` epochs of minibatch Adam and
/// report the held-out overlap before and after.
pub fn train_knn(config: &KnnTaskConfig) -> Result<KnnTrial> {
    config.validate()?;
    let kind = config.kind();
    let mut data_rng = stream_rng(config.seed, streams::DATA);
    let world = KnnWorld::new(config, &mut data_rng)?;
    let train: Vec<KnnInstance> = (0..config.train_instances)
        .map(|_| generate_knn_instance(&mut data_rng, config, &world))
        .collect::<Result<_>>()?;
    let mut test_rng = stream_rng(config.seed, streams::TEST);
    let test: Vec<KnnInstance> = (0..config.test_instances)
        .map(|_| generate_knn_instance(&mut test_rng, config, &world))
        .collect::<Result<_>>()?;

    let mut model = KnnModel::init(config, &mut stream_rng(config.seed, streams::INIT))?;
    let (untrained_overlap, _) = mean_overlap(&model, &test)?;
    let chance = chance_overlap(&mut stream_rng(config.seed, streams::CHANCE), &test, config.n, config.k, config.chance_draws);

    let mut opt = OptimizerState::new(OptimizerKind::adam(config.lr), &model.embed);
    let mut sigma_opt = model.sigma_net.as_ref().map(|n| OptimizerState::new(OptimizerKind::sgd(config.sigma_lr), n));
    let mut sampler = GumbelSampler::new(config.seed, streams::NOISE);
    let mut schedule = config.schedule()?;
    let lins = train.iter().map(|s| linearize_knn_loss(&s.distances, &s.y)).collect::<Result<Vec<_>>>()?;
    let draws = if config.sigma_mode == SigmaMode::Zero { 1 } else { config.perturbations };

    let mut curve = Vec::with_capacity(config.epochs);
    let (mut total_escalations, mut total_ties) = (0u64, 0u64);
    let (mut final_loss, mut final_sigma) = (f64::NAN, 0.0);
    for epoch in 0..config.epochs {
        let (mut loss_sum, mut sigma_sum, mut star_ok, mut eps_ok) = (0.0, 0.0, 0.0, 0.0);
        let (mut escalations, mut ties) = (0u64, 0u64);
        for (batch, lin_batch) in train.chunks(config.batch_size).zip(lins.chunks(config.batch_size)) {
            let mut grads = Gradients::zeros_like(&model.embed);
            let mut sigma_grads = model.sigma_net.as_ref().map(Gradients::zeros_like);
            for (inst, lin) in batch.iter().zip(lin_batch) {
                let emb = model.embed_all(inst)?;
                let table = model.table(&emb)?;
                let (sigma, sigma_tape) = model.sigma_with_tape(inst)?;
                if !sigma.is_finite() {
                    return Err(Error::NonFinite(format!("sigma at epoch {epoch}")));
                }
                sigma_sum += sigma;
                let mut signals = Vec::with_capacity(draws);
                for _ in 0..draws {
                    let field = if sigma == 0.0 && draws == 1 {
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
                        |y, y_hat| knn_linear_loss(&inst.distances, y, y_hat),
                    )?;
                    escalations += es.escalations as u64;
                    star_ok += overlap(&es.signal.y_star, &inst.y);
                    eps_ok += overlap(&es.signal.y_star_eps, &inst.y);
                    signals.push(es.signal);
                }
                let avg = SignalAverage::from_signals(&signals, config.n);
                ties += avg.discarded as u64;
                loss_sum += avg.mean_loss;
                model.accumulate(&emb, &avg.score_cotangent, &mut grads)?;
                if let (Some(net), Some(tape), Some(g)) = (&model.sigma_net, &sigma_tape, sigma_grads.as_mut()) {
                    if avg.sigma_cotangent != 0.0 {
                        g.add_scaled(&net.backward(tape, &[avg.sigma_cotangent])?, 1.0);
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            grads.scale(inv);
            opt.step(&mut model.embed, &grads)?;
            if let (Some(net), Some(o), Some(mut g)) = (model.sigma_net.as_mut(), sigma_opt.as_mut(), sigma_grads) {
                g.scale(inv);
                o.step(net, &g)?;
            }
        }
        let m = train.len() as f64;
        let seen = m * draws as f64;
        final_loss = loss_sum / m;
        if !final_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        final_sigma = sigma_sum / m;
        total_escalations += escalations;
        total_ties += ties;
        curve.push(CurveRow {
            trial_id: 0,
            epoch,
            train_loss: final_loss,
            pct_correct_y_star: 100.0 * star_ok / seen,
            pct_correct_y_star_eps: 100.0 * eps_ok / seen,
            sigma_mean: final_sigma,
            epsilon: schedule.current,
            escalations,
            ties,
        });
    }

    let (trained_overlap, any_wrong) = mean_overlap(&model, &test)?;
    let record = TrialRecord {
        trial_id: 0,
        seed: config.seed,
        d_or_nk: format!("n{}k{}", config.n, config.k),
        epochs_run: curve.len(),
        final_train_loss: final_loss,
        prop_any_wrong: any_wrong,
        prop_wrong: 1.0 - trained_overlap,
        sigma_final: final_sigma,
        escalations: total_escalations,
        ties: total_ties,
    };
    Ok(KnnTrial { record, curve, trained_overlap, untrained_overlap, chance_overlap: chance, model })
}

/// Aggregate of repeated k-NN trials. Standard errors are across trials.
#[derive(Debug, Clone, Serialize)]
pub struct KnnReport {
    pub trained_mean: f64,
    pub trained_se: f64,
    pub untrained_mean: f64,
    pub untrained_se: f64,
    pub chance_mean: f64,
    pub chance_se: f64,
    /// `(trained − chance) / sqrt(se_trained² + se_chance²)`.
    pub z_above_chance: f64,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    #[serde(skip)]
    pub trials: Vec<KnnTrial>,
}

impl KnnReport {
    pub fn curves(&self) -> Vec<CurveRow> {
        self.trials.iter().flat_map(|t| t.curve.iter().cloned()).collect()
    }
}

pub fn run_knn_repetitions(config: &KnnTaskConfig, trials: usize, workers: Option<usize>) -> Result<KnnReport> {
    config.validate()?;
    let (outcomes, failures) = run_surviving_trials(config.seed, trials, workers, |i, seed| {
        let mut t = train_knn(&KnnTaskConfig { seed, ..config.clone() })?;
        t.record.trial_id = i;
        t.curve.iter_mut().for_each(|c| c.trial_id = i);
        Ok(t)
    })?;
    let trained: Vec<f64> = outcomes.iter().map(|t| t.trained_overlap).collect();
    let untrained: Vec<f64> = outcomes.iter().map(|t| t.untrained_overlap).collect();
    let chance: Vec<f64> = outcomes.iter().map(|t| t.chance_overlap).collect();
    let (trained_se, chance_se) = (standard_error(&trained), standard_error(&chance));
    let gap = mean(&trained) - mean(&chance);
    let se = (trained_se.powi(2) + chance_se.powi(2)).sqrt();
    Ok(KnnReport {
        trained_mean: mean(&trained),
        trained_se,
        untrained_mean: mean(&untrained),
        untrained_se: standard_error(&untrained),
        chance_mean: mean(&chance),
        chance_se,
        z_above_chance: if se > 0.0 { gap / se } else if gap > 0.0 { f64::INFINITY } else { 0.0 },
        records: outcomes.iter().map(|t| t.record.clone()).collect(),
        failures,
        trials: outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_net(dim: usize) -> DenseNet {
        let mut w = vec![0.0; dim * dim];
        (0..dim).for_each(|i| w[i * dim + i] = 1.0);
        DenseNet::from_layers(vec![crate::nn::Layer {
            in_dim: dim,
            out_dim: dim,
            weights: w,
            bias: vec![0.0; dim],
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    #[test]
    fn labels_match_distance_sort() {
        let cfg = KnnTaskConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let world = KnnWorld::new(&cfg, &mut rng).unwrap();
        for _ in 0..100 {
            let inst = generate_knn_instance(&mut rng, &cfg, &world).unwrap();
            let mut order: Vec<usize> = (0..cfg.n).collect();
            order.sort_by(|&a, &b| inst.distances[a].total_cmp(&inst.distances[b]).then(a.cmp(&b)));
            assert_eq!(inst.y, Structure::topk_from(order[..cfg.k].to_vec()));
            assert_eq!(inst.query_features.len(), cfg.feature_dim());
        }
    }

    #[test]
    fn full_set_when_k_equals_n() {
        let cfg = KnnTaskConfig { n: 6, k: 6, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let world = KnnWorld::new(&cfg, &mut rng).unwrap();
        let inst = generate_knn_instance(&mut rng, &cfg, &world).unwrap();
        assert_eq!(inst.y, Structure::TopK((0..6).collect()));
    }

    #[test]
    fn identity_embedding_without_distortion_is_exact() {
        let cfg = KnnTaskConfig { distortion: Distortion::none(), input_dim: 3, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let world = KnnWorld::new(&cfg, &mut rng).unwrap();
        let model = KnnModel::with_embedding(cfg.k, identity_net(3));
        for _ in 0..50 {
            let inst = generate_knn_instance(&mut rng, &cfg, &world).unwrap();
            assert_eq!(inst.query_features, inst.query);
            assert_eq!(model.predict(&inst).unwrap(), inst.y);
        }
    }

    #[test]
    fn rotation_is_orthonormal() {
        let rot = random_rotation(&mut ChaCha8Rng::seed_from_u64(0), 5);
        for i in 0..5 {
            for j in 0..5 {
                let dot: f64 = rot[i].iter().zip(&rot[j]).map(|(a, b)| a * b).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chance_baseline_is_k_over_n() {
        let cfg = KnnTaskConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let world = KnnWorld::new(&cfg, &mut rng).unwrap();
        let inst: Vec<_> = (0..20).map(|_| generate_knn_instance(&mut rng, &cfg, &world).unwrap()).collect();
        let c = chance_overlap(&mut rng, &inst, cfg.n, cfg.k, 2000);
        assert!((c - 0.15).abs() < 0.01, "{c}");
    }

    #[test]
    fn config_validation() {
        assert!(KnnTaskConfig::default().validate().is_ok());
        assert!(KnnTaskConfig { k: 21, ..Default::default() }.validate().is_err());
        assert!(KnnTaskConfig { k: 0, ..Default::default() }.validate().is_err());
        assert!(KnnTaskConfig { epsilon: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn short_training_is_deterministic() {
        let cfg = KnnTaskConfig { epochs: 3, train_instances: 20, test_instances: 10, seed: 5, ..Default::default() };
        let a = train_knn(&cfg).unwrap();
        let b = train_knn(&cfg).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.model, b.model);
        assert_eq!(a.record, b.record);
    }
}
