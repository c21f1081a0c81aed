//! Matched-seed training with ε = −12 and ε = +12: a negative ε pulls the
//! loss-perturbed prediction towards the label, a positive ε pushes it away.
//! Compare the correct entries of the perturbed prediction under each sign.
//!
//! cargo run --release --example epsilon_sign -- [d] [trials]

use perturbed_direct::experiments::{run_sorting_repetitions, SortingTaskConfig};

fn main() -> perturbed_direct::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let d = args.next().flatten().unwrap_or(15);
    let trials = args.next().flatten().unwrap_or(3);
    let run = |epsilon: f64| run_sorting_repetitions(&SortingTaskConfig { d, epsilon, seed: 5, ..Default::default() }, trials, None);
    let (neg, pos) = (run(-12.0)?, run(12.0)?);
    println!("trial  %correct y* (eps -12)  %correct y* (eps +12)");
    for (i, (a, b)) in neg.final_pct_correct_y_star().iter().zip(pos.final_pct_correct_y_star()).enumerate() {
        println!("{i:>5}  {a:>21.1}  {b:>21.1}");
    }
    let last = |r: &perturbed_direct::experiments::SortingReport| r.trials[0].curve.last().cloned();
    if let (Some(a), Some(b)) = (last(&neg), last(&pos)) {
        println!("trial 0 final epoch: y*(eps) correct {:.1}% vs {:.1}%", a.pct_correct_y_star_eps, b.pct_correct_y_star_eps);
    }
    Ok(())
}
