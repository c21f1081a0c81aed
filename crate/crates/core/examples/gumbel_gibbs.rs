//! Perturbed argmax frequencies against the Gibbs law.
//!
//! A single unstructured choice follows `softmax(μ/σ)` exactly. A matching
//! perturbed one assignment at a time does not, and the gap is printed.
//!
//! cargo run --release --example gumbel_gibbs -- [samples]

use perturbed_direct::gumbel::{empirical_gibbs_check, matching_2x2_induced_law, total_variation, GumbelSampler};
use perturbed_direct::solvers::ExactSolver;
use perturbed_direct::structure::ScoreTable;

fn main() -> perturbed_direct::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100_000);

    let choice = ScoreTable::choice(vec![1.0, 0.5, 0.0])?;
    for sigma in [0.25, 0.5, 1.0, 100.0] {
        let c = empirical_gibbs_check(&choice, sigma, samples, &ExactSolver, &mut GumbelSampler::new(1, 0))?;
        println!("choice  sigma {sigma:>6}: empirical {:.3?} gibbs {:.3?} TV {:.4}", c.empirical, c.gibbs, c.total_variation);
    }

    let m2 = ScoreTable::matching_from_rows(&[vec![0.7, -0.1], vec![0.2, 0.4]])?;
    let c = empirical_gibbs_check(&m2, 1.0, samples, &ExactSolver, &mut GumbelSampler::new(2, 0))?;
    let induced = matching_2x2_induced_law(&m2, 1.0)?;
    println!(
        "2x2 matching: empirical {:.3?}, gibbs {:.3?} (TV {:.4}), induced {:.3?} (TV {:.4})",
        c.empirical,
        c.gibbs,
        c.total_variation,
        induced,
        total_variation(&c.empirical, &induced)
    );

    let m3 = ScoreTable::matching_from_rows(&[vec![0.5, 0.0, -0.3], vec![0.1, 0.4, 0.2], vec![-0.2, 0.3, 0.6]])?;
    let c = empirical_gibbs_check(&m3, 1.0, samples, &ExactSolver, &mut GumbelSampler::new(3, 0))?;
    println!("3x3 matching: TV to the Gibbs law {:.4} over {} structures", c.total_variation, c.structures.len());
    Ok(())
}
