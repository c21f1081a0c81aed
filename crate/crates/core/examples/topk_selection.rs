//! Top-k selection and the linear overlap loss used for nearest neighbours.
//!
//! cargo run --release --example topk_selection

use perturbed_direct::solvers::{knn_linear_loss, linearize_knn_loss, solve_topk};
use perturbed_direct::structure::{ScoreTable, Structure};

fn main() -> perturbed_direct::Result<()> {
    let distances = [0.1, 0.2, 0.3, 0.4, 0.5];
    // nearest first: scores are negative distances
    let scores = ScoreTable::topk(2, distances.iter().map(|d| -d).collect())?;
    let best = solve_topk(&scores)?;
    println!("top-2 by score: {:?}, value {:.2}", best.structure, best.value);

    let y = Structure::topk_from(vec![0, 1]);
    let lin = linearize_knn_loss(&distances, &y)?;
    for guess in [vec![0, 1], vec![1, 2], vec![3, 4]] {
        let g = Structure::topk_from(guess);
        println!("loss({g:?}) = {:+.2}, linear form {:+.2}", knn_linear_loss(&distances, &y, &g)?, lin.evaluate(&g));
    }
    Ok(())
}
