//! One direct gradient signal: the difference between the loss-perturbed and
//! plain perturbed argmax, divided by ε, with escalation when they agree.
//!
//! cargo run --release --example gradient_signal

use perturbed_direct::estimator::{escalating_gradient_signal, EpsilonSchedule};
use perturbed_direct::gumbel::GumbelSampler;
use perturbed_direct::solvers::{linearize_matching_loss, matching_quadratic_loss, ExactSolver};
use perturbed_direct::structure::{ScoreTable, Structure};

fn main() -> perturbed_direct::Result<()> {
    let x = [0.9, 0.1, 0.5];
    let y = Structure::Matching(vec![2, 0, 1]);
    // scores that prefer the identity, which is wrong for this sequence
    let scores = ScoreTable::matching_from_rows(&[vec![2.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 2.0]])?;
    let lin = linearize_matching_loss(&x, &y)?;
    let mut sampler = GumbelSampler::new(5, 0);

    for eps in [-0.1, -1.0, -12.0] {
        let mut schedule = EpsilonSchedule::new(eps, 1.1, 10.0 * eps)?;
        let field = sampler.sample_field_for(scores.kind())?;
        let s = escalating_gradient_signal(&scores, &field, 0.5, &lin, &mut schedule, &ExactSolver, &y, |a, b| {
            matching_quadratic_loss(&x, a, b)
        })?;
        let g = &s.signal;
        println!(
            "eps0 {eps:>6}: y* {:?} -> y*(eps) {:?} at eps {:.3} after {} escalations, loss {:.3}",
            g.y_star, g.y_star_eps, g.epsilon, s.escalations, g.loss_at_y_star
        );
        println!("             score cotangent {:+.2?}, sigma cotangent {:+.3}", g.score_cotangent, g.sigma_cotangent);
    }
    Ok(())
}
