//! Maximum-weight perfect matching, checked against enumeration.
//!
//! cargo run --release --example assignment_solver -- [d]

use perturbed_direct::solvers::{brute_force_maximize, solve_assignment};
use perturbed_direct::structure::ScoreTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> perturbed_direct::Result<()> {
    let d = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let table = ScoreTable::matching(d, (0..d * d).map(|_| rng.random_range(0.0..1.0)).collect())?;
    for i in 0..d {
        let row: Vec<String> = (0..d).map(|j| format!("{:.2}", table.at(i, j))).collect();
        println!("  {}", row.join(" "));
    }
    let fast = solve_assignment(&table)?;
    println!("row i -> column {:?}, value {:.4}, margin {:.2e}", fast.structure.as_permutation().unwrap(), fast.value, fast.margin);
    if d <= 8 {
        let oracle = brute_force_maximize(&table, None)?;
        println!("enumeration agrees: {}", oracle.structure == fast.structure && oracle.value == fast.value);
    }

    let tied = ScoreTable::matching_from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]])?;
    let s = solve_assignment(&tied)?;
    println!("all-equal 2x2: {:?} (margin {}, tie broken lexicographically)", s.structure, s.margin);
    Ok(())
}
