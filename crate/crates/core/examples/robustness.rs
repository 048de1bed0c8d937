//! Size of the bootstrap treatment tests under non-normal errors on a
//! balanced 3 x 2 layout with 25 observations per cell.
//!
//! cargo run --release --example robustness -- [outer] [inner]

use hetanova::inference::{TestMethod, TestTarget};
use hetanova::simulation::presets;
use hetanova::simulation::run_study;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let outer: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(400);
    let inner: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(400);
    println!("{:<60} {:>8} {:>8}", "errors", "LRT", "MCT");
    for mut config in presets::robustness(&presets::ROBUSTNESS_FAMILIES) {
        config.outer_reps = outer;
        config.bootstrap.replicates = inner;
        let r = run_study(&config)?;
        let p = |m| {
            r.outcome(TestTarget::TreatmentA, m)
                .map_or(f64::NAN, |o| o.proportion)
        };
        println!(
            "{:<60} {:>8.3} {:>8.3}",
            config.error_family.to_string(),
            p(TestMethod::LrtBoot),
            p(TestMethod::MctBoot)
        );
    }
    Ok(())
}
