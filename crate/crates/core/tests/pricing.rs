mod common;

use std::time::Duration;

use common::{fixture, oracle, price, HORIZON};
use railcg::pricing::PricingEngine;
use railcg::profiles::ProfileConfig;
use railcg_lp::MipStatus;

#[test]
fn both_engines_match_exhaustive_enumeration() {
    let config = common::fixture_config();
    let mut with_penalty = 0;
    for seed in 0..40 {
        let f = fixture(seed, &config, HORIZON);
        let (best, _) = oracle(&f).expect("some slot is free");
        for engine in [PricingEngine::Search, PricingEngine::Mip] {
            let out = price(&f, engine, None);
            assert!(
                (out.reduced_cost - best).abs() < 1e-6,
                "seed {seed} {engine:?}: {} vs oracle {best}",
                out.reduced_cost
            );
            assert!(out.bound <= out.reduced_cost + 1e-6);
            assert_eq!(out.unflagged, 0);
        }
        if !f.cliques.is_empty() {
            with_penalty += 1;
        }
    }
    assert!(with_penalty >= 30);
}

/// Inserted halts make the program much harder, so it runs under a time
/// limit here: a proven optimum must equal the search, and otherwise the
/// search value must lie between the program's bound and incumbent.
#[test]
fn engines_agree_on_paths_with_inserted_halts() {
    let config = ProfileConfig {
        k: 2,
        ..Default::default()
    };
    let mut proven = 0;
    for seed in 0..15 {
        let f = fixture(seed, &config, 600);
        let search = price(&f, PricingEngine::Search, None);
        let mip = price(&f, PricingEngine::Mip, Some(Duration::from_secs(2)));
        assert!(mip.bound <= search.reduced_cost + 1e-6, "seed {seed}");
        assert!(
            search.reduced_cost <= mip.reduced_cost + 1e-6,
            "seed {seed}"
        );
        if mip.status == MipStatus::Optimal {
            proven += 1;
            assert!(
                (search.reduced_cost - mip.reduced_cost).abs() < 1e-6,
                "seed {seed}: search {} mip {}",
                search.reduced_cost,
                mip.reduced_cost
            );
        }
    }
    assert!(proven >= 10);
}

/// A single blocking path in a clique of its own: the cheapest path pays
/// the penalty while it is below the detour cost and avoids the conflict
/// above it.
#[test]
fn penalty_flips_at_detour_cost() {
    let mut checked = 0;
    for seed in 0..40 {
        if let Some(errors) = common::penalty_flip(seed) {
            assert!(errors.is_empty(), "{errors:?}");
            checked += 1;
        }
    }
    assert!(
        checked >= 5,
        "only {checked} fixtures had a positive detour cost"
    );
}
