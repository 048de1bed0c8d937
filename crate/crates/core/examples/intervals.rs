//! Simultaneous confidence intervals for the three contrast families,
//! printed as CSV.
//!
//! cargo run --release --example intervals -- [alpha]

use std::path::Path;

use hetanova::bootstrap::BootstrapSettings;
use hetanova::inference::{simultaneous_ci, CiFamily};
use hetanova::io::read_summary_json_path;
use hetanova::mle::SolverSettings;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let alpha: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(0.05);
    let table =
        read_summary_json_path(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/table7.json"))?;
    let boot = BootstrapSettings::new(5000, alpha, 11);
    for family in [
        CiFamily::TreatmentAPairs,
        CiFamily::SimpleAPairs,
        CiFamily::InteractionPairs,
    ] {
        let ci = simultaneous_ci(&table, family, alpha, &boot, &SolverSettings::default())?;
        let hits = ci.intervals.iter().filter(|i| i.significant).count();
        println!(
            "# {family:?}: multiplier {:.4}, {hits} of {} exclude 0",
            ci.multiplier,
            ci.intervals.len()
        );
        print!("{}", ci.to_csv()?);
        println!();
    }
    Ok(())
}
