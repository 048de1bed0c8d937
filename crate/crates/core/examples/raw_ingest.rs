//! From long-format observations to a summary table and a test report in
//! JSON, then back through the summary file formats.
//!
//! cargo run --release --example raw_ingest

use hetanova::data::summarize_inferred;
use hetanova::inference::{run_test, TestMethod, TestRequest, TestTarget};
use hetanova::io::{read_raw_csv, read_summary_json, write_matrix_csv, write_summary_json};

const RAW: &str = "\
A,B,y
1,1,10.2
1,1,11.9
1,1,9.4
1,2,12.1
1,2,13.5
1,2,11.0
1,2,12.8
2,1,14.0
2,1,17.3
2,1,12.2
2,2,15.1
2,2,16.0
2,2,18.4
3,1,9.9
3,1,10.4
3,1,10.1
3,2,12.6
3,2,11.1
3,2,12.2
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw = read_raw_csv(RAW.as_bytes())?;
    let table = summarize_inferred(&raw)?;

    let mut json = Vec::new();
    write_summary_json(&table, &mut json)?;
    println!("{}", String::from_utf8(json.clone())?);
    assert_eq!(read_summary_json(json.as_slice())?, table);

    let mut means = Vec::new();
    write_matrix_csv(table.means(), &mut means)?;
    println!("mean.csv:\n{}", String::from_utf8(means)?);

    let report = run_test(
        &table,
        &TestRequest::new(TestTarget::TreatmentA, TestMethod::LrtBoot)
            .with_seed(3)
            .with_replicates(2000),
    )?;
    println!("{}", report.to_json()?);
    Ok(())
}
