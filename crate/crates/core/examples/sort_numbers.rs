//! Learn to sort uniform sequences with a perturbed matching predictor.
//!
//! cargo run --release --example sort_numbers -- [d] [trials] [epsilon] [sigma: learned|zero|<value>] [loss: placement|row]

use std::time::Instant;

use perturbed_direct::experiments::{run_sorting_repetitions, SigmaMode, SortingLoss, SortingTaskConfig};

fn main() -> perturbed_direct::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let d = args.first().and_then(|s| s.parse().ok()).unwrap_or(5);
    let trials = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let epsilon = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(-12.0);
    let sigma_mode = match args.get(3).map(String::as_str) {
        None | Some("learned") => SigmaMode::Learned,
        Some("zero") => SigmaMode::Zero,
        Some(v) => SigmaMode::Fixed(v.parse().expect("sigma must be learned, zero or a number")),
    };
    let loss = match args.get(4).map(String::as_str) {
        Some("row") => SortingLoss::RowQuadratic,
        _ => SortingLoss::Placement,
    };

    let config = SortingTaskConfig { d, epsilon, sigma_mode, loss, seed: 2024, ..SortingTaskConfig::default() };
    let start = Instant::now();
    let report = run_sorting_repetitions(&config, trials, None)?;

    println!("trial  epochs  loss      sigma   wrong  %y*");
    for (t, pct) in report.trials.iter().zip(report.final_pct_correct_y_star()) {
        let r = &t.record;
        println!(
            "{:>5}  {:>6}  {:<8.4}  {:<6.3}  {:>4.0}%  {:.1}",
            r.trial_id,
            r.epochs_run,
            r.final_train_loss,
            r.sigma_final,
            100.0 * r.prop_wrong,
            pct
        );
    }
    let m = &report.metrics;
    println!(
        "d={d} sigma={} loss={loss:?}: {:.1}% perfect, prop wrong {:.2}% ± {:.2}%, {} escalations, {} ties ({:.1?})",
        sigma_mode.label(),
        m.percent_zero_prop_any_wrong,
        m.prop_wrong_mean,
        m.prop_wrong_std,
        m.escalation_count,
        m.tie_count,
        start.elapsed()
    );
    Ok(())
}
