//! Prices one service against a blocking path of another service. Below
//! the detour cost the cheapest path pays the clique penalty and runs
//! through the conflict, above it the path avoids the blocker.

use railcg::driver::Prepared;
use railcg::model::synth;
use railcg::path::TrainPath;
use railcg::pricing::{Pricer, PricingEngine, PricingRequest};
use railcg::profiles::ProfileConfig;
use railcg_lp::BundledSolver;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ProfileConfig {
        k: 2,
        insert_halts: false,
        ..Default::default()
    };
    let backend = BundledSolver::default();
    for seed in 0..50 {
        let instance = synth::random_instance(seed, 2);
        let prepared = Prepared::new(&instance, &config)?;
        let t_max = instance
            .services
            .iter()
            .map(|s| s.earliest_departure())
            .max()
            .unwrap()
            + 1800;
        let mut pricer = Pricer {
            services: &instance.services,
            sets: &prepared.profiles.sets,
            store: &prepared.profiles.store,
            catalog: &prepared.catalog,
            t_max,
            unclipped: false,
            backend: &backend,
            engine: PricingEngine::Search,
            service_edges: true,
        };
        let free = pricer.price(&PricingRequest::default(), &[])?;
        let free_path = free.path.expect("an empty network has a free path");
        let chain = &prepared.profiles.sets[1].chains()[0];
        let along = |mut t: i64| {
            let steps = chain
                .iter()
                .map(|&v| {
                    let step = (v, t);
                    t += prepared.profiles.store.get(v).run_time;
                    step
                })
                .collect();
            TrainPath::new(1, steps)
        };
        let start = instance.services[1].earliest_departure();
        let Some(blocker) = (start..start + 1800)
            .map(along)
            .find(|b| prepared.catalog.paths_conflict(&free_path, b))
        else {
            continue;
        };
        let pool = [blocker];
        let avoid = PricingRequest {
            forbidden: vec![0],
            ..Default::default()
        };
        let detour = pricer.price(&avoid, &pool)?.cost;
        if detour <= free.cost {
            continue;
        }
        println!(
            "seed {seed}: delay {} through the blocker, {detour} around it",
            free.cost
        );
        for beta in [detour - free.cost - 1.0, detour - free.cost + 1.0] {
            let members: &[usize] = &[0];
            for engine in [PricingEngine::Search, PricingEngine::Mip] {
                pricer.engine = engine;
                let req = PricingRequest {
                    cliques: vec![(members, beta)],
                    ..Default::default()
                };
                let out = pricer.price(&req, &pool)?;
                println!(
                    "  beta {beta:>6}: {engine:?} reduced cost {:>6.1}, pays the penalty: {}",
                    out.reduced_cost,
                    !out.conflicts.is_empty()
                );
            }
        }
        return Ok(());
    }
    Err("no fixture with a positive detour cost".into())
}
