//! Writes the two-station corridor timetable as instance JSON.
//!
//! `cargo run --example corridor_instance -- 12 > corridor.json`

use railcg::model::synth;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map_or(Ok(12), |s| s.parse())?;
    let instance = synth::demo_instance(n);
    println!("{}", instance.to_json());
    Ok(())
}
