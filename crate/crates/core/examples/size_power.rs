//! Empirical size of the bootstrap treatment tests under Configuration 1
//! with equal cell sizes of 5, plus a short power curve.
//!
//! cargo run --release --example size_power -- [outer] [inner]

use std::time::Instant;

use hetanova::inference::{TestMethod, TestTarget};
use hetanova::simulation::{presets, run_study, StudyTest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let outer: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(500);
    let inner: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(500);

    let tests = vec![
        StudyTest::new(TestTarget::TreatmentA, TestMethod::LrtBoot),
        StudyTest::new(TestTarget::TreatmentA, TestMethod::MctBoot),
        StudyTest::new(TestTarget::TreatmentA, TestMethod::ClassicalF),
    ];
    println!("size at alpha = 0.05, outer = {outer}, inner H = {inner}");
    println!(
        "{:<12} {:>8} {:>8} {:>8} {:>8}",
        "cell", "LRT", "MCT", "F", "secs"
    );
    for rho in ["rho1", "rho2", "rho3", "rho4", "rho5"] {
        let mut config = presets::named(2, 3, "N1", rho, tests.clone());
        config.outer_reps = outer;
        config.bootstrap.replicates = inner;
        config.seed = 2024;
        let start = Instant::now();
        let result = run_study(&config)?;
        let p: Vec<f64> = result.outcomes.iter().map(|o| o.proportion).collect();
        println!(
            "{:<12} {:>8.3} {:>8.3} {:>8.3} {:>8.1}",
            config.id,
            p[0],
            p[1],
            p[2],
            start.elapsed().as_secs_f64()
        );
    }

    println!("\npower, alpha = c*(0, -0.2, 0.2), N15 and rho12");
    let mut base = presets::named(3, 2, "N15", "rho12", tests);
    base.alpha = vec![0.0, -0.2, 0.2];
    base.outer_reps = outer;
    base.bootstrap.replicates = inner;
    for c in [0.0, 1.0, 2.0, 3.0, 4.0] {
        base.effect_scale = c;
        let r = run_study(&base)?;
        let p: Vec<String> = r
            .outcomes
            .iter()
            .map(|o| {
                format!(
                    "{} {:.3} (se {:.3})",
                    o.test.method.short_name(),
                    o.proportion,
                    o.stderr
                )
            })
            .collect();
        println!("c = {c:<4} {}", p.join("  "));
    }
    Ok(())
}
