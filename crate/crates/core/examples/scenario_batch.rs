//! Runs a disturbed replication batch from a scenario file and prints the
//! report as CSV followed by the aggregates.
//!
//! `cargo run --example scenario_batch -- data/small_scenario.json`

use std::path::PathBuf;

use railcg::harness::{run_batch, write_csv, BatchOptions, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/small_scenario.json")
        });
    let scenario = ScenarioConfig::load(&path)?;
    let instance = scenario.instance()?;
    let report = run_batch(&scenario, &instance, &BatchOptions::default())?;
    write_csv(std::io::stdout(), &report.rows)?;
    let a = &report.aggregates;
    println!(
        "# {} replications, mean cpu {:.3} s, mean delay quotient {:.2}, integral relaxations {:.0}%",
        a.replications,
        a.cpu_mean,
        a.delay_quotient_mean,
        100.0 * a.integer_share
    );
    for f in &report.failures {
        println!("# replication {} failed: {}", f.replication, f.message);
    }
    Ok(())
}
