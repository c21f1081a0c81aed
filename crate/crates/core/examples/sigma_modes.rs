//! The three noise regimes on one sorting problem with shared seeds:
//! no noise, a fixed scale and a learned scale.
//!
//! cargo run --release --example sigma_modes -- [d] [trials]

use perturbed_direct::experiments::{run_sorting_repetitions, SigmaMode, SortingTaskConfig};

fn main() -> perturbed_direct::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let d = args.next().flatten().unwrap_or(8);
    let trials = args.next().flatten().unwrap_or(5);
    for sigma_mode in [SigmaMode::Zero, SigmaMode::Fixed(1.0), SigmaMode::Learned] {
        let config = SortingTaskConfig { d, sigma_mode, seed: 99, ..SortingTaskConfig::default() };
        let r = run_sorting_repetitions(&config, trials, None)?;
        let sigmas: Vec<f64> = r.trials.iter().map(|t| t.record.sigma_final).collect();
        println!(
            "{:<10} {:>5.1}% perfect, prop wrong {:>5.2}%, final sigma {:.3?}",
            sigma_mode.label(),
            r.metrics.percent_zero_prop_any_wrong,
            r.metrics.prop_wrong_mean,
            sigmas
        );
    }
    Ok(())
}
