//! Direct loss minimization for perturbed structured predictors.
//!
//! For a score table `μ_u`, a perturbation field `γ` and noise scale `σ_v`,
//! the predictor is `y* = argmax μ(ŷ) + σ Σ_i γ_i(ŷ_i)` and the
//! loss-perturbed predictor adds `ε ℓ(y, ŷ)` to the objective. The gradient
//! of the expected loss is estimated from the two argmaxes alone:
//!
//! - w.r.t. the scores, `(1[y*(ε)] − 1[y*]) / ε` as an indicator table;
//! - w.r.t. `σ`, `(Σ_i γ_i(y*_i(ε)) − Σ_i γ_i(y*_i)) / ε`.
//!
//! Both are emitted as cotangents so the caller can chain them through any
//! score or noise network. With `ε < 0` the loss-perturbed argmax moves
//! towards lower-loss structures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gumbel::PerturbationField;
use crate::solvers::{LinearLossCoefficients, Maximizer, Solution};
use crate::structure::{ScoreTable, Structure};

/// Signals whose best-vs-second-best gap falls below this are discarded.
pub const NEAR_TIE_MARGIN: f64 = 1e-12;

/// Loss-perturbation magnitude with its escalation rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub epsilon: f64,
    pub escalation_factor: f64,
    /// Signed bound on `current`; escalation stops once `|current|` reaches `|cap|`.
    pub cap: f64,
    pub current: f64,
}

impl EpsilonSchedule {
    pub fn new(epsilon: f64, escalation_factor: f64, cap: f64) -> Result<Self> {
        if !epsilon.is_finite() || !cap.is_finite() || !escalation_factor.is_finite() {
            return Err(Error::NonFinite("epsilon schedule".into()));
        }
        if escalation_factor < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "escalation factor must be >= 1, got {escalation_factor}"
            )));
        }
        if epsilon.signum() != cap.signum() && epsilon != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cap {cap} must carry the sign of epsilon {epsilon}"
            )));
        }
        if cap.abs() < epsilon.abs() {
            return Err(Error::InvalidParameter(format!(
                "|cap| = {} is below |epsilon| = {}",
                cap.abs(),
                epsilon.abs()
            )));
        }
        Ok(Self { epsilon, escalation_factor, cap, current: epsilon })
    }

    /// `ε₀ = −12`, 10% escalation, capped at ten times the initial magnitude.
    pub fn matching_default() -> Self {
        Self::with_matching_epsilon(-12.0)
    }

    /// Matching schedule for any nonzero `ε₀`, capped at `10 ε₀`.
    pub fn with_matching_epsilon(epsilon: f64) -> Self {
        Self::new(epsilon, 1.10, 10.0 * epsilon).expect("valid matching schedule")
    }

    /// Top-k schedule: 10% escalation up to `|ε| = 0.9999`.
    pub fn topk(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 1.10, 0.9999f64.copysign(epsilon))
    }

    /// A schedule that never escalates.
    pub fn constant(epsilon: f64) -> Self {
        Self { epsilon, escalation_factor: 1.0, cap: epsilon, current: epsilon }
    }

    pub fn at_cap(&self) -> bool {
        self.current.abs() >= self.cap.abs() || self.escalation_factor == 1.0
    }

    /// Grow `|current|` after a zero signal with positive loss, otherwise
    /// reset to `ε₀`.
    pub fn escalate(&self, observed_loss: f64, signal_was_zero: bool) -> Self {
        let mut next = *self;
        if observed_loss > 0.0 && signal_was_zero {
            let grown = self.current * self.escalation_factor;
            next.current = if grown.abs() > self.cap.abs() { self.cap } else { grown };
        } else {
            next.current = self.epsilon;
        }
        next
    }
}

/// Cotangents produced by one perturbation draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientSignal {
    /// `(1[y*(ε)] − 1[y*]) / ε`, shaped like the score table.
    pub score_cotangent: Vec<f64>,
    /// `(Σ γ(y*(ε)) − Σ γ(y*)) / ε`.
    pub sigma_cotangent: f64,
    pub y_star: Structure,
    pub y_star_eps: Structure,
    pub loss_at_y_star: f64,
    pub epsilon: f64,
    pub margin_y_star: f64,
    pub margin_y_star_eps: f64,
}

impl GradientSignal {
    pub fn is_zero(&self) -> bool {
        self.y_star == self.y_star_eps
    }

    pub fn is_near_tie(&self) -> bool {
        self.margin_y_star.min(self.margin_y_star_eps) < NEAR_TIE_MARGIN
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {sigma}")))
    }
}

/// Maximize `μ + σγ (+ ε ℓ)`; the returned value includes every term,
/// the loss constant included.
fn solve_objective<M: Maximizer + ?Sized>(
    scores: &ScoreTable,
    field: &PerturbationField,
    sigma: f64,
    loss: Option<(&LinearLossCoefficients, f64)>,
    maximizer: &M,
) -> Result<Solution> {
    check_sigma(sigma)?;
    let kind = scores.kind();
    let (noise, _) = field.as_linear_table(kind)?;
    let mut table = scores.add_scaled(&noise, sigma)?;
    if let Some((lin, eps)) = loss {
        lin.check_kind(kind)?;
        if eps != 0.0 {
            table = table.add_scaled(&lin.per_entry, eps)?;
        }
    }
    let mut solution = maximizer.maximize(&table)?;
    let s = &solution.structure;
    solution.value = scores.objective(s) + sigma * field.sum_at(s, kind);
    if let Some((lin, eps)) = loss {
        solution.value += eps * lin.evaluate(s);
    }
    Ok(solution)
}

/// `y*`: argmax of the perturbed score. `σ = 0` gives the noise-free predictor.
pub fn predict<M: Maximizer + ?Sized>(
    scores: &ScoreTable,
    field: &PerturbationField,
    sigma: f64,
    maximizer: &M,
) -> Result<Structure> {
    Ok(solve_objective(scores, field, sigma, None, maximizer)?.structure)
}

/// `y*(ε)`: argmax of the perturbed score plus `ε ℓ` at the schedule's current ε.
pub fn loss_perturbed_predict<M: Maximizer + ?Sized>(
    scores: &ScoreTable,
    field: &PerturbationField,
    sigma: f64,
    loss_linear: &LinearLossCoefficients,
    schedule: &EpsilonSchedule,
    maximizer: &M,
) -> Result<Structure> {
    Ok(solve_objective(scores, field, sigma, Some((loss_linear, schedule.current)), maximizer)?
        .structure)
}

/// Realized maximum `max_ŷ μ(ŷ) + σ Σ γ(ŷ) + ε ℓ(ŷ)` for one field.
pub fn realized_max<M: Maximizer + ?Sized>(
    scores: &ScoreTable,
    field: &PerturbationField,
    sigma: f64,
    loss_linear: &LinearLossCoefficients,
    epsilon: f64,
    maximizer: &M,
) -> Result<f64> {
    Ok(solve_objective(scores, field, sigma, Some((loss_linear, epsilon)), maximizer)?.value)
}

fn build_signal(
    scores: &ScoreTable,
    field: &PerturbationField,
    y_star: &Solution,
    y_star_eps: Solution,
    epsilon: f64,
    loss_at_y_star: f64,
) -> GradientSignal {
    let kind = scores.kind();
    let mut score_cotangent = vec![0.0; kind.table_len()];
    let mut sigma_cotangent = 0.0;
    if y_star.structure != y_star_eps.structure {
        let inv = 1.0 / epsilon;
        for p in y_star_eps.structure.selected_positions(kind) {
            score_cotangent[p] += inv;
        }
        for p in y_star.structure.selected_positions(kind) {
            score_cotangent[p] -= inv;
        }
        sigma_cotangent = (field.sum_at(&y_star_eps.structure, kind)
            - field.sum_at(&y_star.structure, kind))
            * inv;
    }
    GradientSignal {
        score_cotangent,
        sigma_cotangent,
        y_star: y_star.structure.clone(),
        y_star_eps: y_star_eps.structure,
        loss_at_y_star,
        epsilon,
        margin_y_star: y_star.margin,
        margin_y_star_eps: y_star_eps.margin,
    }
}

/// One-draw direct gradient signal at the schedule's current ε.
///
/// `loss_fn(y, ŷ)` evaluates the task loss; `loss_linear` must be its linear
/// form in `ŷ` for the same true label.
#[allow(clippy::too_many_arguments)]
pub fn gradient_signal<M, F>(
    scores: &ScoreTable,
    field: &PerturbationField,
    sigma: f64,
    loss_linear: &LinearLossCoefficients,
    schedule: &EpsilonSchedule,
    maximizer: &M,
    true_label: &Structure,
    loss_fn: F,
) -> Result<GradientSignal>
where
    M: Maximizer + ?Sized,
    F: Fn(&Structure, &Structure) -> Result<f64>,
{
    let epsilon = schedule.current;
    if epsilon == 0.0 {
        return Err(Error::InvalidParameter("gradient signal needs a nonzero epsilon".into()));
    }
    let y_star = solve_objective(scores, field, sigma, None, maximizer)?;
    let loss = loss_fn(true_label, &y_star.structure)?;
    let y_star_eps = solve_objective(scores, field, sigma, Some((loss_linear, epsilon)), maximizer)?;
    Ok(build_signal(scores, field, &y_star, y_star_eps, epsilon, loss))
}

/// A signal together with the number of ε escalations spent on it.
#[derive(Debug, Clone)]
pub struct EscalatedSignal {
    pub signal: GradientSignal,
    pub escalations: usize,
}

/// [`gradient_signal`] that retries with a larger `|ε|` while the signal is
/// zero but the loss is positive, up to the schedule's cap.
///
/// On return the schedule has been reset to `ε₀` unless the cap was reached
/// without producing a signal, in which case it stays escalated.
#[allow(clippy::too_many_arguments)]
pub fn escalating_gradient_signal<M, F>(
    scores: &ScoreTable,
    field: &PerturbationField,
    sigma: f64,
    loss_linear: &LinearLossCoefficients,
    schedule: &mut EpsilonSchedule,
    maximizer: &M,
    true_label: &Structure,
    loss_fn: F,
) -> Result<EscalatedSignal>
where
    M: Maximizer + ?Sized,
    F: Fn(&Structure, &Structure) -> Result<f64>,
{
    if schedule.current == 0.0 {
        return Err(Error::InvalidParameter("gradient signal needs a nonzero epsilon".into()));
    }
    let y_star = solve_objective(scores, field, sigma, None, maximizer)?;
    let loss = loss_fn(true_label, &y_star.structure)?;
    let mut escalations = 0;
    loop {
        let eps = schedule.current;
        let y_star_eps = solve_objective(scores, field, sigma, Some((loss_linear, eps)), maximizer)?;
        let zero = y_star_eps.structure == y_star.structure;
        if zero && loss > 0.0 && !schedule.at_cap() {
            *schedule = schedule.escalate(loss, true);
            escalations += 1;
            continue;
        }
        if !(zero && loss > 0.0) {
            *schedule = schedule.escalate(loss, zero);
        }
        let signal = build_signal(scores, field, &y_star, y_star_eps, eps, loss);
        return Ok(EscalatedSignal { signal, escalations });
    }
}

/// Mean of several signals for one example, skipping near ties.
#[derive(Debug, Clone)]
pub struct SignalAverage {
    pub score_cotangent: Vec<f64>,
    pub sigma_cotangent: f64,
    pub mean_loss: f64,
    pub used: usize,
    pub discarded: usize,
}

impl SignalAverage {
    /// Average in the given order. Losses are averaged over every signal,
    /// cotangents over the ones that pass the near-tie guard.
    pub fn from_signals<'a>(signals: impl IntoIterator<Item = &'a GradientSignal>, len: usize) -> Self {
        let mut score = vec![0.0; len];
        let mut sigma = 0.0;
        let mut loss = 0.0;
        let (mut used, mut discarded, mut total) = (0usize, 0usize, 0usize);
        for s in signals {
            total += 1;
            loss += s.loss_at_y_star;
            if s.is_near_tie() {
                discarded += 1;
                continue;
            }
            used += 1;
            for (acc, c) in score.iter_mut().zip(&s.score_cotangent) {
                *acc += c;
            }
            sigma += s.sigma_cotangent;
        }
        if used > 0 {
            let inv = 1.0 / used as f64;
            score.iter_mut().for_each(|v| *v *= inv);
            sigma *= inv;
        }
        Self {
            score_cotangent: score,
            sigma_cotangent: sigma,
            mean_loss: if total > 0 { loss / total as f64 } else { 0.0 },
            used,
            discarded,
        }
    }
}

/// Result of [`argmax_stability_probe`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityProbe {
    /// `y*(ε)` of the unperturbed scores, the `n → ∞` limit.
    pub limit: Structure,
    /// First `n` whose argmax differs from the limit.
    pub first_change: Option<usize>,
    /// Smallest `n₀` with the limit argmax for every `n₀ ≤ n ≤ steps`;
    /// `None` when even the last step differs.
    pub stable_from: Option<usize>,
}

/// Evaluate `y*(ε)` under `scores + direction / n` for `n = 1..=steps`.
#[allow(clippy::too_many_arguments)]
pub fn argmax_stability_probe<M: Maximizer + ?Sized>(
    scores: &ScoreTable,
    field: &PerturbationField,
    sigma: f64,
    loss_linear: &LinearLossCoefficients,
    schedule: &EpsilonSchedule,
    direction: &[f64],
    steps: usize,
    maximizer: &M,
) -> Result<StabilityProbe> {
    if direction.len() != scores.len() {
        return Err(Error::Shape(format!(
            "direction has {} entries, table has {}",
            direction.len(),
            scores.len()
        )));
    }
    let eps = schedule.current;
    let limit = solve_objective(scores, field, sigma, Some((loss_linear, eps)), maximizer)?.structure;
    let mut first_change = None;
    let mut stable_from = Some(1);
    for n in 1..=steps {
        let moved = scores.add_scaled(direction, 1.0 / n as f64)?;
        let s = solve_objective(&moved, field, sigma, Some((loss_linear, eps)), maximizer)?.structure;
        if s != limit {
            first_change.get_or_insert(n);
            stable_from = if n == steps { None } else { Some(n + 1) };
        }
    }
    Ok(StabilityProbe { limit, first_change, stable_from })
}
