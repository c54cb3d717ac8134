use proptest::prelude::*;
use railcg::cliques::{CliqueStore, ConflictGraph};
use railcg::master::MasterProblem;
use railcg::path::TrainPath;
use railcg::profiles::ProfileId;
use railcg_lp::{solve_lp, BundledSolver, LpStatus, MipStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random pool: every service starts with one isolated expensive path, so
/// the master is always feasible; later paths conflict at random.
fn random_master(seed: u64, services: usize, extra: usize) -> (MasterProblem, Vec<Vec<bool>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut master = MasterProblem::new(services);
    let mut graph = ConflictGraph::new();
    let mut store = CliqueStore::new();
    let mut service_of = Vec::new();
    let total = services + extra;
    let mut adj = vec![vec![false; total]; total];
    for k in 0..total {
        let r = if k < services {
            k
        } else {
            rng.random_range(0..services)
        };
        let cost = if k < services {
            1000.0
        } else {
            rng.random_range(0..100) as f64
        };
        let neighbors: Vec<usize> = if k < services {
            Vec::new()
        } else {
            (services..k)
                .filter(|&j| service_of[j] == r || rng.random_bool(0.4))
                .collect()
        };
        for &j in &neighbors {
            adj[k][j] = true;
            adj[j][k] = true;
        }
        service_of.push(r);
        let node = graph.add_node(&neighbors);
        let update = store.update_with_node(&graph, node);
        master.sync_cliques(&store, &update).unwrap();
        let rows: Vec<usize> = update
            .created
            .iter()
            .chain(&update.extended)
            .copied()
            .collect();
        let path = TrainPath::new(r, vec![(ProfileId(k as u32), k as i64)]);
        master.add_path_column(path, cost, &rows).unwrap();
    }
    (master, adj)
}

fn enumerate(master: &MasterProblem, adj: &[Vec<bool>], services: usize) -> f64 {
    fn rec(
        r: usize,
        services: usize,
        master: &MasterProblem,
        adj: &[Vec<bool>],
        chosen: &mut Vec<usize>,
        best: &mut f64,
    ) {
        if r == services {
            let c: f64 = chosen.iter().map(|&a| master.cost(a)).sum();
            *best = best.min(c);
            return;
        }
        for a in 0..master.num_columns() {
            if master.paths()[a].service == r && chosen.iter().all(|&b| !adj[a][b]) {
                chosen.push(a);
                rec(r + 1, services, master, adj, chosen, best);
                chosen.pop();
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(0, services, master, adj, &mut Vec::new(), &mut best);
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn dual_form_matches_primal(seed in any::<u64>(), services in 1usize..=4, extra in 0usize..=14) {
        let (mut master, _) = random_master(seed, services, extra);
        let duals = master.solve_lp(&BundledSolver::default()).unwrap();
        let primal = master.primal();
        let direct = solve_lp(&primal).unwrap();
        prop_assert_eq!(direct.status, LpStatus::Optimal);
        prop_assert!((duals.objective - direct.objective).abs() <= 1e-6 * (1.0 + direct.objective.abs()));
        prop_assert!(primal.max_violation(&duals.x) <= 1e-6);
        let cost: f64 = duals.x.iter().enumerate().map(|(a, v)| v * master.cost(a)).sum();
        prop_assert!((cost - duals.objective).abs() <= 1e-6 * (1.0 + cost.abs()));
        // Reduced costs of pool columns are nonnegative at the optimum.
        for a in 0..master.num_columns() {
            let r = master.paths()[a].service;
            let penalty: f64 = master.rows_of(a).iter().map(|&c| duals.beta[c]).sum();
            prop_assert!(master.cost(a) - duals.alpha[r] + penalty >= -1e-6);
        }
        prop_assert!(duals.beta.iter().all(|&b| b >= 0.0));
    }

    #[test]
    fn integer_master_matches_enumeration(seed in any::<u64>(), services in 1usize..=4, extra in 0usize..=10) {
        let (master, adj) = random_master(seed, services, extra);
        let best = enumerate(&master, &adj, services);
        let sel = master.solve_integer(None, 0.0, None).unwrap();
        prop_assert_eq!(sel.status, MipStatus::Optimal);
        prop_assert!((sel.objective - best).abs() < 1e-9);
        for (i, &a) in sel.chosen.iter().enumerate() {
            prop_assert_eq!(master.paths()[a].service, i);
            for &b in &sel.chosen[i + 1..] {
                prop_assert!(!adj[a][b]);
            }
        }
    }
}

#[test]
fn warm_resolves_track_cold_ones() {
    let (mut master, _) = random_master(3, 3, 12);
    let first = master.solve_lp(&BundledSolver::default()).unwrap();
    let again = master.solve_lp(&BundledSolver::default()).unwrap();
    assert!((first.objective - again.objective).abs() < 1e-9);
}

#[test]
fn gap_target_stops_early_with_a_bound() {
    let (master, adj) = random_master(11, 4, 14);
    let best = enumerate(&master, &adj, 4);
    let sel = master.solve_integer(None, 0.5, None).unwrap();
    assert!(sel.objective >= best - 1e-9);
    assert!(sel.bound <= best + 1e-9);
}
