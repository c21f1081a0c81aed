//! The quadratic sorting loss is linear in the predicted matching, so the
//! loss-augmented argmax is still one assignment problem.
//!
//! cargo run --release --example loss_linearization

use perturbed_direct::solvers::{
    enumerate_structures, linearize_matching_loss, linearize_matching_placement_loss, matching_placement_loss,
    matching_quadratic_loss,
};
use perturbed_direct::structure::{FamilyKind, Structure};

fn main() -> perturbed_direct::Result<()> {
    let x = [0.2, 0.7];
    let (id, swap) = (Structure::identity_matching(2), Structure::Matching(vec![1, 0]));
    println!("d=2, x={x:?}: loss(identity, swap) = {}", matching_quadratic_loss(&x, &id, &swap)?);

    let x = [0.42, 0.05, 0.91, 0.33];
    let y = Structure::Matching(vec![2, 0, 3, 1]);
    let lin = linearize_matching_loss(&x, &y)?;
    let place = linearize_matching_placement_loss(&x, &y)?;
    let (mut worst, mut worst_place) = (0.0f64, 0.0f64);
    for y_hat in enumerate_structures(FamilyKind::Matching { d: 4 }, 100)? {
        worst = worst.max((lin.evaluate(&y_hat) - matching_quadratic_loss(&x, &y, &y_hat)?).abs());
        worst_place = worst_place.max((place.evaluate(&y_hat) - matching_placement_loss(&x, &y, &y_hat)?).abs());
    }
    println!("d=4, all 24 matchings: max |linear − quadratic| = {worst:.1e} (row form), {worst_place:.1e} (placement form)");
    println!("row-form constant {:.4}, coefficients of row 0: {:.4?}", lin.constant, &lin.per_entry[..4]);
    Ok(())
}
