//! Zero-mean Gumbel perturbations and the perturbed-argmax predictor.
//!
//! The zero-mean Gumbel law has CDF `G(t) = exp(-exp(-(t + c)))` where `c` is
//! the Euler–Mascheroni constant, so `E[γ] = 0` and `Var[γ] = π²/6`. The
//! classical (unshifted) Gumbel, whose mean is `c`, is available through
//! [`GumbelSampler::unshifted`] for checks that are easier to state in that
//! form.
//!
//! Perturbations are low-dimensional: one draw per `(component, local
//! assignment)` pair, laid out in a [`PerturbationField`]. For a single-component
//! family (an unstructured choice) this is exactly the Gumbel-max trick and the
//! induced distribution over options is the Gibbs law at temperature `σ`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::{enumerate_structures, Maximizer, Solution};
use crate::structure::{FamilyKind, ScoreTable, Structure};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest family [`empirical_gibbs_check`] will enumerate.
pub const MAX_ENUMERATED_FAMILY: u128 = 10_000;

/// Deterministic source of i.i.d. Gumbel draws.
///
/// Equal `(seed, stream_id)` pairs produce bit-identical sequences on every
/// platform. Each trial or worker should own its own stream.
#[derive(Debug, Clone)]
pub struct GumbelSampler {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl GumbelSampler {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    pub fn open_uniform(&mut self) -> f64 {
        loop {
            let u = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u > 0.0 {
                return u;
            }
        }
    }

    /// One zero-mean Gumbel draw by inverse CDF.
    pub fn standard(&mut self) -> f64 {
        -(-self.open_uniform().ln()).ln() - EULER_GAMMA
    }

    /// One classical Gumbel(0, 1) draw, mean `EULER_GAMMA`.
    pub fn unshifted(&mut self) -> f64 {
        -(-self.open_uniform().ln()).ln()
    }

    pub fn sample_standard_gumbel(&mut self, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.standard()).collect()
    }

    /// Independent zero-mean Gumbel draws, one per `(component, assignment)`.
    pub fn sample_field(&mut self, domain_sizes: &[usize]) -> Result<PerturbationField> {
        if domain_sizes.is_empty() || domain_sizes.contains(&0) {
            return Err(Error::InvalidParameter(
                "a field needs at least one component and positive domain sizes".into(),
            ));
        }
        let total: usize = domain_sizes.iter().sum();
        let values = self.sample_standard_gumbel(total);
        PerturbationField::new(domain_sizes.to_vec(), values)
    }

    /// Field shaped for `kind`.
    pub fn sample_field_for(&mut self, kind: FamilyKind) -> Result<PerturbationField> {
        self.sample_field(&kind.field_domain_sizes())
    }
}

/// Zero-mean Gumbel CDF.
pub fn gumbel_cdf(t: f64) -> f64 {
    (-(-(t + EULER_GAMMA)).exp()).exp()
}

/// Zero-mean Gumbel density `g(t) = exp(-(t + c)) G(t)`.
pub fn gumbel_pdf(t: f64) -> f64 {
    let z = t + EULER_GAMMA;
    (-z - (-z).exp()).exp()
}

/// Table of perturbation values `γ_i(a)` for component `i` and local
/// assignment `a < domain_sizes[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationField {
    domain_sizes: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl PerturbationField {
    pub fn new(domain_sizes: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(domain_sizes.len());
        let mut total = 0usize;
        for &s in &domain_sizes {
            offsets.push(total);
            total += s;
        }
        if values.len() != total {
            return Err(Error::Shape(format!(
                "field with domain sizes summing to {total} got {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("perturbation field value".into()));
        }
        Ok(Self { domain_sizes, offsets, values })
    }

    /// All-zero field shaped for `kind`; useful to switch the noise off.
    pub fn zeros_for(kind: FamilyKind) -> Self {
        let sizes = kind.field_domain_sizes();
        let total = sizes.iter().sum();
        Self::new(sizes, vec![0.0; total]).expect("zero field is valid")
    }

    pub fn domain_sizes(&self) -> &[usize] {
        &self.domain_sizes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn components(&self) -> usize {
        self.domain_sizes.len()
    }

    pub fn get(&self, component: usize, assignment: usize) -> f64 {
        debug_assert!(assignment < self.domain_sizes[component]);
        self.values[self.offsets[component] + assignment]
    }

    pub fn check_compatible(&self, kind: FamilyKind) -> Result<()> {
        if self.domain_sizes != kind.field_domain_sizes() {
            return Err(Error::Shape(format!(
                "field with domain sizes {:?} does not fit {kind:?}",
                self.domain_sizes
            )));
        }
        Ok(())
    }

    /// Express `Σ_i γ_i(ŷ_i)` as `constant + Σ table · indicator(ŷ)`.
    pub fn as_linear_table(&self, kind: FamilyKind) -> Result<(Vec<f64>, f64)> {
        self.check_compatible(kind)?;
        Ok(match kind {
            FamilyKind::Matching { .. } | FamilyKind::Choice { .. } => (self.values.clone(), 0.0),
            FamilyKind::TopK { n, .. } => {
                let table = (0..n).map(|i| self.get(i, 1) - self.get(i, 0)).collect();
                let constant = (0..n).map(|i| self.get(i, 0)).sum();
                (table, constant)
            }
        })
    }

    /// `Σ_i γ_i(ŷ_i)` for a structure of `kind`.
    pub fn sum_at(&self, structure: &Structure, kind: FamilyKind) -> f64 {
        structure
            .local_assignments(kind)
            .into_iter()
            .enumerate()
            .map(|(i, a)| self.get(i, a))
            .sum()
    }
}

/// Scores plus scaled perturbation as a single table the solver can maximize.
pub(crate) fn perturbed_table(
    scores: &ScoreTable,
    field: &PerturbationField,
    sigma: f64,
) -> Result<ScoreTable> {
    let (noise, _constant) = field.as_linear_table(scores.kind())?;
    scores.add_scaled(&noise, sigma)
}

/// Exact maximizer of `Σ μ(ŷ) + σ Σ_i γ_i(ŷ_i)`.
///
/// The returned value is the realized maximum, the per-draw quantity whose
/// expectation is the prediction generating function.
pub fn perturbed_argmax<M: Maximizer + ?Sized>(
    scores: &ScoreTable,
    field: &PerturbationField,
    sigma: f64,
    maximizer: &M,
) -> Result<Solution> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let table = perturbed_table(scores, field, sigma)?;
    let mut solution = maximizer.maximize(&table)?;
    solution.value = scores.objective(&solution.structure)
        + sigma * field.sum_at(&solution.structure, scores.kind());
    Ok(solution)
}

/// Outcome of comparing perturbed-argmax frequencies against a Gibbs law.
#[derive(Debug, Clone, Serialize)]
pub struct GibbsCheck {
    pub structures: Vec<Structure>,
    pub empirical: Vec<f64>,
    pub gibbs: Vec<f64>,
    pub total_variation: f64,
    pub ties: u64,
}

/// Exact Gibbs probabilities `∝ exp(score / σ)` over an enumerated family.
pub fn gibbs_distribution(scores: &ScoreTable, sigma: f64) -> Result<(Vec<Structure>, Vec<f64>)> {
    let structures = enumerate_structures(scores.kind(), MAX_ENUMERATED_FAMILY)?;
    let logits: Vec<f64> = structures.iter().map(|s| scores.objective(s) / sigma).collect();
    Ok((structures, softmax(&logits)))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Empirical frequencies of `samples` perturbed argmaxes with the
/// low-dimensional field of the family, compared in total variation with the
/// Gibbs law at temperature `σ`.
///
/// The two coincide for single-component families. For genuinely structured
/// families the reported distance measures how far the low-dimensional
/// perturbation is from the Gibbs law.
pub fn empirical_gibbs_check<M: Maximizer + ?Sized>(
    scores: &ScoreTable,
    sigma: f64,
    samples: usize,
    maximizer: &M,
    sampler: &mut GumbelSampler,
) -> Result<GibbsCheck> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let (structures, gibbs) = gibbs_distribution(scores, sigma)?;
    let empirical = empirical_frequencies(scores, sigma, samples, maximizer, sampler, &structures)?;
    let (counts, ties) = empirical;
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / samples as f64).collect();
    let total_variation = total_variation(&empirical, &gibbs);
    Ok(GibbsCheck { structures, empirical, gibbs, total_variation, ties })
}

pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `[P(identity), P(swap)]` for the perturbed argmax of a 2×2 matching under
/// its low-dimensional field. Each structure collects two draws, so the score
/// gap is shifted by a sum of two independent logistic variables and the law
/// is not the Gibbs law of the total scores.
pub fn matching_2x2_induced_law(scores: &ScoreTable, sigma: f64) -> Result<[f64; 2]> {
    if scores.kind() != (FamilyKind::Matching { d: 2 }) {
        return Err(Error::Shape(format!("expected a 2x2 matching, got {:?}", scores.kind())));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let delta = (scores.at(0, 0) + scores.at(1, 1) - scores.at(0, 1) - scores.at(1, 0)) / sigma;
    let logistic_pdf = |s: f64| {
        let e = (-s.abs()).exp();
        e / (1.0 + e).powi(2)
    };
    let logistic_sf = |s: f64| 1.0 / (1.0 + s.exp());
    let p = simpson(|s| logistic_pdf(s) * logistic_sf(-delta - s), -60.0, 60.0, 60_000);
    Ok([p, 1.0 - p])
}

/// Counts of each enumerated structure among `samples` perturbed argmaxes.
pub fn empirical_frequencies<M: Maximizer + ?Sized>(
    scores: &ScoreTable,
    sigma: f64,
    samples: usize,
    maximizer: &M,
    sampler: &mut GumbelSampler,
    structures: &[Structure],
) -> Result<(Vec<u64>, u64)> {
    let kind = scores.kind();
    let index: std::collections::HashMap<&Structure, usize> =
        structures.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut counts = vec![0u64; structures.len()];
    let mut ties = 0u64;
    for _ in 0..samples {
        let field = sampler.sample_field_for(kind)?;
        let solution = perturbed_argmax(scores, &field, sigma, maximizer)?;
        if solution.tied() {
            ties += 1;
        }
        counts[index[&solution.structure]] += 1;
    }
    Ok((counts, ties))
}

/// Sample mean of `max_y {μ(y)/σ + γ(y)}` with one independent draw per
/// structure, against the log-partition function.
#[derive(Debug, Clone, Serialize)]
pub struct MaxStability {
    pub mean: f64,
    pub std_error: f64,
    pub log_partition: f64,
}

impl MaxStability {
    pub fn z_score(&self) -> f64 {
        (self.mean - self.log_partition) / self.std_error
    }
}

/// Max-stability check with zero-mean draws, where the expected maximum is
/// exactly `log Σ_y exp(μ(y)/σ)`. Pass `unshifted = true` to use classical
/// Gumbel draws instead; the target then moves up by `EULER_GAMMA`.
pub fn max_stability_check(
    structure_scores: &[f64],
    sigma: f64,
    samples: usize,
    sampler: &mut GumbelSampler,
    unshifted: bool,
) -> Result<MaxStability> {
    if structure_scores.is_empty() || samples < 2 {
        return Err(Error::InvalidParameter("need scores and at least two samples".into()));
    }
    let scaled: Vec<f64> = structure_scores.iter().map(|m| m / sigma).collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let m = scaled
            .iter()
            .map(|s| s + if unshifted { sampler.unshifted() } else { sampler.standard() })
            .fold(f64::NEG_INFINITY, f64::max);
        sum += m;
        sum_sq += m * m;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    let shift = if unshifted { EULER_GAMMA } else { 0.0 };
    Ok(MaxStability {
        mean,
        std_error: (var / n).sqrt(),
        log_partition: log_sum_exp(&scaled) + shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{BruteForce, ExactSolver};

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn draws_have_zero_mean_and_gumbel_variance() {
        let mut s = GumbelSampler::new(11, 0);
        let draws = s.sample_standard_gumbel(1_000_000);
        let (m, v) = mean_var(&draws);
        assert!(m.abs() < 0.01, "mean {m}");
        let target = std::f64::consts::PI.powi(2) / 6.0;
        assert!((v - target).abs() < 0.02, "variance {v}");
    }

    #[test]
    fn same_seed_and_stream_are_bit_identical() {
        let a = GumbelSampler::new(5, 3).sample_standard_gumbel(64);
        let b = GumbelSampler::new(5, 3).sample_standard_gumbel(64);
        assert_eq!(a, b);
        let c = GumbelSampler::new(5, 4).sample_standard_gumbel(64);
        assert_ne!(a, c);
    }

    #[test]
    fn cdf_values() {
        assert!((gumbel_cdf(-EULER_GAMMA) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(gumbel_cdf(1e3), 1.0);
        assert!((gumbel_cdf(0.0) - (-(-EULER_GAMMA).exp()).exp()).abs() < 1e-15);
        assert!((gumbel_cdf(0.0) - 0.5703).abs() < 1e-4);
    }

    #[test]
    fn pdf_normalizes_and_matches_cdf() {
        let total = simpson(gumbel_pdf, -20.0, 20.0, 20_000);
        assert!((total - 1.0).abs() < 1e-6, "integral {total}");
        // numerical integral of the density up to 0 recovers the closed form
        let upto = simpson(gumbel_pdf, -20.0, 0.0, 20_000);
        assert!((upto - gumbel_cdf(0.0)).abs() < 1e-8);
    }

    #[test]
    fn pdf_mode_at_minus_c() {
        let peak = gumbel_pdf(-EULER_GAMMA);
        assert!((peak - (-1f64).exp()).abs() < 1e-15);
        assert!(gumbel_pdf(-EULER_GAMMA + 1e-3) < peak);
        assert!(gumbel_pdf(-EULER_GAMMA - 1e-3) < peak);
        assert!((peak / gumbel_cdf(-EULER_GAMMA) - 1.0).abs() < 1e-15);
        assert!(gumbel_pdf(-1e4).is_finite());
    }

    #[test]
    fn field_shape_and_determinism() {
        let f = GumbelSampler::new(1, 0).sample_field(&[2, 2, 2]).unwrap();
        assert_eq!(f.values().len(), 6);
        let g = GumbelSampler::new(1, 0).sample_field(&[2, 2, 2]).unwrap();
        assert_eq!(f, g);
        assert!(GumbelSampler::new(1, 0).sample_field(&[2, 0]).is_err());
    }

    #[test]
    fn field_cells_are_uncorrelated() {
        let mut s = GumbelSampler::new(99, 1);
        let n = 100_000;
        let (mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let f = s.sample_field(&[2, 3]).unwrap();
            a.push(f.get(0, 1));
            b.push(f.get(1, 2));
        }
        let (ma, va) = mean_var(&a);
        let (mb, vb) = mean_var(&b);
        let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n as f64 - 1.0);
        let r = cov / (va * vb).sqrt();
        assert!(r.abs() < 0.01, "pearson {r}");
    }

    #[test]
    fn two_way_choice_matches_softmax() {
        let scores = ScoreTable::choice(vec![0.0, 2f64.ln()]).unwrap();
        let check =
            empirical_gibbs_check(&scores, 1.0, 100_000, &ExactSolver, &mut GumbelSampler::new(3, 0))
                .unwrap();
        assert!((check.empirical[0] - 1.0 / 3.0).abs() < 0.01);
        assert!((check.empirical[1] - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn three_way_choice_matches_softmax() {
        let scores = ScoreTable::choice(vec![1.0, 0.5, 0.0]).unwrap();
        let check =
            empirical_gibbs_check(&scores, 0.5, 100_000, &ExactSolver, &mut GumbelSampler::new(4, 0))
                .unwrap();
        let expected = softmax(&[2.0, 1.0, 0.0]);
        assert!((expected[0] - 0.6652).abs() < 1e-4);
        for (e, g) in check.empirical.iter().zip(&expected) {
            assert!((e - g).abs() < 0.01, "{e} vs {g}");
        }
        assert!(check.total_variation < 0.02);
    }

    #[test]
    fn vanishing_sigma_is_deterministic() {
        let scores = ScoreTable::choice(vec![0.3, 1.0, -0.2]).unwrap();
        let mut s = GumbelSampler::new(8, 0);
        for _ in 0..10_000 {
            let f = s.sample_field_for(scores.kind()).unwrap();
            let sol = perturbed_argmax(&scores, &f, 1e-9, &ExactSolver).unwrap();
            assert_eq!(sol.structure, Structure::Choice(1));
        }
    }

    #[test]
    fn uniform_scores_and_large_sigma_approach_uniform() {
        let flat = ScoreTable::matching(3, vec![0.25; 9]).unwrap();
        let c = empirical_gibbs_check(&flat, 1.0, 60_000, &ExactSolver, &mut GumbelSampler::new(1, 2))
            .unwrap();
        assert!(c.gibbs.iter().all(|p| (p - 1.0 / 6.0).abs() < 1e-12));
        assert!(c.total_variation < 0.02, "tv {}", c.total_variation);

        let bounded = ScoreTable::choice(vec![1.0, -1.0, 0.5, 0.0]).unwrap();
        let c = empirical_gibbs_check(&bounded, 100.0, 100_000, &ExactSolver, &mut GumbelSampler::new(2, 2))
            .unwrap();
        let uniform = vec![0.25; 4];
        assert!(total_variation(&c.empirical, &uniform) < 0.02);
    }

    /// Probability that the identity wins a 2×2 matching under the
    /// low-dimensional field: the identity-minus-swap noise is a sum of two
    /// independent standard logistic variables.
    #[test]
    fn two_by_two_matching_follows_the_induced_law() {
        let scores = ScoreTable::matching(2, vec![0.7, -0.1, 0.2, 0.4]).unwrap();
        let sigma = 1.0;
        let check =
            empirical_gibbs_check(&scores, sigma, 100_000, &ExactSolver, &mut GumbelSampler::new(6, 0))
                .unwrap();
        let induced = matching_2x2_induced_law(&scores, sigma).unwrap();
        assert!(induced[0] > 0.5 && (induced[0] + induced[1] - 1.0).abs() < 1e-12);
        assert!(total_variation(&check.empirical, &induced) < 0.02);
        // the Gibbs law over total scores is a different distribution here
        assert!(check.total_variation > 0.02, "gibbs tv {}", check.total_variation);
    }

    #[test]
    fn max_stability_shifted_and_unshifted() {
        let mu = [0.3, -1.2, 0.8, 0.0, 2.0, -0.5];
        let r = max_stability_check(&mu, 0.7, 100_000, &mut GumbelSampler::new(21, 0), false).unwrap();
        assert!(r.z_score().abs() < 3.0, "{r:?}");
        let u = max_stability_check(&mu, 0.7, 100_000, &mut GumbelSampler::new(21, 1), true).unwrap();
        assert!(u.z_score().abs() < 3.0, "{u:?}");
    }

    #[test]
    fn temperature_identity_holds_exactly() {
        let mut s = GumbelSampler::new(17, 0);
        for _ in 0..200 {
            let mu: Vec<f64> = (0..16).map(|_| s.standard()).collect();
            let scores = ScoreTable::matching(4, mu.clone()).unwrap();
            let field = s.sample_field_for(scores.kind()).unwrap();
            for sigma in [0.1, 1.0, 7.5] {
                let a = perturbed_argmax(&scores, &field, sigma, &BruteForce::default()).unwrap();
                let scaled = ScoreTable::matching(4, mu.iter().map(|m| m / sigma).collect()).unwrap();
                let b = perturbed_argmax(&scaled, &field, 1.0, &BruteForce::default()).unwrap();
                assert_eq!(a.structure, b.structure);
            }
        }
    }

    #[test]
    fn rejects_nonpositive_sigma_and_bad_fields() {
        let scores = ScoreTable::choice(vec![0.0, 1.0]).unwrap();
        let field = PerturbationField::zeros_for(scores.kind());
        assert!(perturbed_argmax(&scores, &field, 0.0, &ExactSolver).is_err());
        let wrong = PerturbationField::zeros_for(FamilyKind::Choice { m: 3 });
        assert!(matches!(
            perturbed_argmax(&scores, &wrong, 1.0, &ExactSolver),
            Err(Error::Shape(_))
        ));
        let big = ScoreTable::matching(8, vec![0.0; 64]).unwrap();
        assert!(matches!(
            empirical_gibbs_check(&big, 1.0, 10, &ExactSolver, &mut GumbelSampler::new(0, 0)),
            Err(Error::FamilyTooLarge(_))
        ));
    }
}
