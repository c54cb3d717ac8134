//! Dispatches a small random corridor instance and prints the schedule.
//!
//! `cargo run --example random_dispatch -- <seed> <services>`

use railcg::check::check_solution;
use railcg::driver::{dispatch, CgConfig};
use railcg::model::synth;
use railcg::profiles::ProfileConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let seed: u64 = std::env::args().nth(1).map_or(Ok(2), |s| s.parse())?;
    let n: usize = std::env::args().nth(2).map_or(Ok(5), |s| s.parse())?;
    let instance = synth::random_instance(seed, n);
    let cfg = ProfileConfig {
        insert_halts: false,
        ..Default::default()
    };
    let result = dispatch(&instance, &cfg, CgConfig::default())?;
    println!(
        "fcfs delay {} -> {} (bound {:.2}, {} iterations, {} columns, {} cliques, {:?})",
        result.fcfs_objective,
        result.objective,
        result.lower_bound,
        result.iterations,
        result.n_columns,
        result.n_cliques,
        result.elapsed
    );
    for p in &result.paths {
        let s = &instance.services[p.service];
        println!(
            "{:>4} departs {:>5}  scheduled exit {:>5}",
            s.id,
            p.departure(),
            s.scheduled_exit
        );
    }
    let prepared = railcg::driver::Prepared::new(&instance, &cfg)?;
    let issues = check_solution(
        &instance.network,
        &instance.services,
        &prepared.profiles.sets,
        &prepared.profiles.store,
        &cfg.margins,
        &result.paths,
    );
    println!(
        "checker: {}",
        if issues.is_empty() {
            "ok".to_string()
        } else {
            issues.join("; ")
        }
    );
    Ok(())
}
