//! Tests on the published two-way summary (four levels of each factor):
//! interaction and treatment effects with bootstrap and asymptotic
//! critical values.
//!
//! cargo run --release --example table7 -- [seed]

use std::path::Path;

use hetanova::inference::{run_test, TestMethod, TestRequest, TestTarget};
use hetanova::io::read_summary_json_path;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(42);
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/table7.json");
    let table = read_summary_json_path(&path)?;
    let m = table.marginals();
    println!("row means {:.4?}", m.rows);
    println!("column means {:.4?}\n", m.cols);

    let plan = [
        (TestTarget::Interaction, TestMethod::LrtBoot),
        (TestTarget::Interaction, TestMethod::MctBoot),
        (TestTarget::Interaction, TestMethod::LrtAsymptotic),
        (TestTarget::TreatmentA, TestMethod::LrtBoot),
        (TestTarget::TreatmentA, TestMethod::MctBoot),
        (TestTarget::TreatmentA, TestMethod::LrtAsymptotic),
        (TestTarget::TreatmentA, TestMethod::MctAsymptotic),
    ];
    println!(
        "{:<12} {:<6} {:>12} {:>12} {:>8}  decision",
        "target", "method", "observed", "critical", "p"
    );
    for (target, method) in plan {
        let r = run_test(&table, &TestRequest::new(target, method).with_seed(seed))?;
        println!(
            "{:<12} {:<6} {:>12.6} {:>12.6} {:>8}  {:?}",
            format!("{target:?}"),
            method.short_name(),
            r.observed,
            r.critical_value,
            r.p_value.map_or("-".into(), |p| format!("{p:.4}")),
            r.decision
        );
    }

    let r = run_test(
        &table,
        &TestRequest::new(TestTarget::TreatmentA, TestMethod::MctBoot).with_seed(seed),
    )?;
    println!("\n{}", r.intervals.expect("max-type tests carry intervals"));
    Ok(())
}
