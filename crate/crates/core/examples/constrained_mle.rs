//! Restricted maximum-likelihood fits by coordinate ascent: the iterates'
//! log-likelihood, the final estimates, and the residuals of the likelihood
//! equations.
//!
//! cargo run --release --example constrained_mle

use std::path::Path;

use hetanova::io::read_summary_json_path;
use hetanova::mle::{
    fit_full, fit_null_no_interaction, fit_null_no_simple_a, stationarity_residuals,
    NoInteractionIteration, SolverSettings,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table =
        read_summary_json_path(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/table7.json"))?;
    let settings = SolverSettings::default();

    let mut it = NoInteractionIteration::new(&table)?;
    println!("sweep  loglik            max change");
    loop {
        let (da, dz) = it.sweep()?;
        if it.iteration <= 5 || it.iteration % 10 == 0 {
            println!(
                "{:>5}  {:<16.10} {:.3e}",
                it.iteration,
                it.loglik(),
                da.max(dz)
            );
        }
        if da.max(dz) <= settings.epsilon {
            println!(
                "{:>5}  {:<16.10} {:.3e}  converged",
                it.iteration,
                it.loglik(),
                da.max(dz)
            );
            break;
        }
    }

    let full = fit_full(&table)?;
    let additive = fit_null_no_interaction(&table, &settings)?;
    let columns = fit_null_no_simple_a(&table, &settings)?;
    println!(
        "\nloglik: full {:.4}, additive {:.4}, columns only {:.4}",
        full.loglik, additive.loglik, columns.loglik
    );
    println!("alpha {:.5?}", additive.alpha);
    println!("zeta  {:.5?}", additive.zeta);
    let r = stationarity_residuals(&table, &additive)?;
    println!(
        "residuals: alpha {:.1e}, zeta {:.1e}, sigma2 {:.1e}",
        r.alpha, r.zeta, r.sigma2
    );
    Ok(())
}
