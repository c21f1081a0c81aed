//! Shrinking a score change `v/n` eventually leaves the loss-perturbed
//! argmax at its unperturbed value; this prints when that happens.
//!
//! cargo run --release --example stability_probe

use perturbed_direct::estimator::{argmax_stability_probe, EpsilonSchedule};
use perturbed_direct::gumbel::PerturbationField;
use perturbed_direct::solvers::{linearize_matching_loss, ExactSolver};
use perturbed_direct::structure::{FamilyKind, ScoreTable, Structure};

fn main() -> perturbed_direct::Result<()> {
    let kind = FamilyKind::Matching { d: 3 };
    let scores = ScoreTable::matching_from_rows(&[vec![1.0, 0.2, 0.0], vec![0.1, 0.9, 0.3], vec![0.0, 0.4, 1.1]])?;
    let lin = linearize_matching_loss(&[0.3, 0.6, 0.9], &Structure::identity_matching(3))?;
    let field = PerturbationField::zeros_for(kind);
    // a direction strong enough to flip the argmax at n = 1
    let direction = [-3.0, 3.0, 0.0, 3.0, -3.0, 0.0, 0.0, 0.0, 0.0];
    let schedule = EpsilonSchedule::constant(-0.5);
    let p = argmax_stability_probe(&scores, &field, 0.0, &lin, &schedule, &direction, 50, &ExactSolver)?;
    println!("limit {:?}, first change at n = {:?}, stable from n = {:?}", p.limit, p.first_change, p.stable_from);
    Ok(())
}
