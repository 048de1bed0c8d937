//! Chi-square points for the asymptotic likelihood-ratio tests and the
//! equicoordinate normal quantile behind the asymptotic max-type test.
//!
//! cargo run --release --example asymptotic

use std::path::Path;

use hetanova::asymptotic::{
    build_sigma_t, chi_square_critical, equicoordinate_quantile_of, DEFAULT_MC_SEED,
};
use hetanova::io::read_summary_json_path;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for df in [1.0, 2.0, 3.0, 9.0, 12.0] {
        println!(
            "chi-square df {df:>4}: upper 5% point {:.4}",
            chi_square_critical(df, 0.05)?
        );
    }

    let table =
        read_summary_json_path(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/table7.json"))?;
    let cov = build_sigma_t(&table)?;
    println!(
        "\nplug-in correlation of the {} pairwise differences:",
        cov.q()
    );
    for r in 0..cov.q() {
        let row: Vec<String> = (0..cov.q())
            .map(|c| format!("{:6.3}", cov.sigma_t[(r, c)]))
            .collect();
        let (i, k) = cov.pairs[r];
        println!("  ({},{})  {}", i + 1, k + 1, row.join(" "));
    }
    for draws in [20_000, 200_000, 1_000_000] {
        let d = equicoordinate_quantile_of(&cov.sigma_t, 0.05, draws, DEFAULT_MC_SEED)?;
        println!("95% equicoordinate quantile, {draws:>9} draws: {d:.4}");
    }
    Ok(())
}
