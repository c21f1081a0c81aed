//! Backward passes of every network the tasks build, against central
//! finite differences.
//!
//! cargo run --release --example gradcheck_nets -- [triples]

use perturbed_direct::experiments::KnnTaskConfig;
use perturbed_direct::verify::gradcheck_suite;

fn main() -> perturbed_direct::Result<()> {
    let triples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    for c in gradcheck_suite(5, &KnnTaskConfig::default(), triples, 1e-5, 1)? {
        println!("{:<24} {:?}: max relative error {:.2e} ({} kink draws resampled)", c.name, c.dims, c.max_relative_error, c.resampled);
    }
    Ok(())
}
