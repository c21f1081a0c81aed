//! Learn an embedding whose top-k nearest neighbours recover the neighbours
//! under a hidden metric that the inputs only show through a distortion.
//!
//! cargo run --release --example knn_distorted -- [trials] [epsilon] [sigma: learned|zero|<value>] [lr] [epochs] [perturbations]

use std::time::Instant;

use perturbed_direct::experiments::{run_knn_repetitions, KnnTaskConfig, SigmaMode};

fn main() -> perturbed_direct::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let defaults = KnnTaskConfig::default();
    let trials = args.first().and_then(|s| s.parse().ok()).unwrap_or(3);
    let epsilon = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(defaults.epsilon);
    let sigma_mode = match args.get(2).map(String::as_str) {
        None | Some("learned") => SigmaMode::Learned,
        Some("zero") => SigmaMode::Zero,
        Some(v) => SigmaMode::Fixed(v.parse().expect("sigma must be learned, zero or a number")),
    };
    let lr = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(defaults.lr);
    let epochs = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(defaults.epochs);
    let perturbations = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(defaults.perturbations);

    let config = KnnTaskConfig { epsilon, sigma_mode, lr, epochs, perturbations, seed: 7, ..defaults };
    let start = Instant::now();
    let report = run_knn_repetitions(&config, trials, None)?;

    println!("trial  untrained  trained  chance  sigma");
    for t in &report.trials {
        println!(
            "{:>5}  {:>9.3}  {:>7.3}  {:>6.3}  {:.3}",
            t.record.trial_id, t.untrained_overlap, t.trained_overlap, t.chance_overlap, t.record.sigma_final
        );
    }
    println!(
        "n={} k={}: trained {:.3} ± {:.3}, untrained {:.3}, chance {:.3}, z = {:.1} ({:.1?})",
        config.n,
        config.k,
        report.trained_mean,
        report.trained_se,
        report.untrained_mean,
        report.chance_mean,
        report.z_above_chance,
        start.elapsed()
    );
    Ok(())
}
