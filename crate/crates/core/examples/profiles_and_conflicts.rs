//! Generates speed-profiles for a few corridor services and summarises the
//! headway intervals between them.
//!
//! `cargo run --example profiles_and_conflicts -- 3`

use railcg::conflicts::ConflictCatalog;
use railcg::model::synth;
use railcg::profiles::{ProfileCatalog, ProfileConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map_or(Ok(3), |s| s.parse())?;
    let instance = synth::demo_instance(n);
    let catalog = ProfileCatalog::generate(
        &instance.network,
        &instance.services,
        &ProfileConfig::default(),
    )?;
    for (s, set) in instance.services.iter().zip(&catalog.sets) {
        let chains = set.chains();
        let fastest = chains
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&v| catalog.store.get(v).run_time)
                    .sum::<i64>()
            })
            .min()
            .unwrap_or(0);
        println!(
            "{:>4}: {} profiles, {} chains, fastest run {} s",
            s.id,
            set.profiles.len(),
            chains.len(),
            fastest
        );
    }
    let conflicts = ConflictCatalog::build(&instance.network, &catalog.store, &catalog.sets);
    println!(
        "{} conflicting profile pairs, {} halting conditions",
        conflicts.num_pairs(),
        conflicts.num_halting()
    );
    let (a, b) = (catalog.sets[0].profiles[0], catalog.sets[n - 1].profiles[0]);
    match conflicts.interval(a, b) {
        Some(i) => println!("first profiles of the outer services conflict for offsets {i:?}"),
        None => println!("first profiles of the outer services never conflict"),
    }
    Ok(())
}
