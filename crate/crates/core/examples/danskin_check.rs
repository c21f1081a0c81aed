//! Per draw, the derivative of the realized maximum with respect to a score
//! entry is that entry's indicator in the maximizer, and with respect to σ
//! it is the field summed along the maximizer.
//!
//! cargo run --release --example danskin_check -- [d] [draws]

use perturbed_direct::verify::danskin_check;

fn main() -> perturbed_direct::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let d = args.next().flatten().unwrap_or(5);
    let draws = args.next().flatten().unwrap_or(200);
    let r = danskin_check(d, draws, 11)?;
    println!(
        "{} of {} draws away from ties: worst score error {:.2e}, worst sigma error {:.2e} ({})",
        r.checked,
        r.draws,
        r.max_score_error,
        r.max_sigma_error,
        if r.passed { "pass" } else { "fail" }
    );
    Ok(())
}
