mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use railcg::cliques::{maximal_cliques, CliqueStore, ConflictGraph};

/// Lower-triangle adjacency bits: node `i` picks its neighbors among `0..i`.
fn graph_strategy(max_nodes: usize) -> impl Strategy<Value = Vec<Vec<bool>>> {
    (1..=max_nodes).prop_flat_map(|n| {
        (0..n)
            .map(|i| proptest::collection::vec(any::<bool>(), i))
            .collect::<Vec<_>>()
    })
}

fn adjacency(lower: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = lower.len();
    let mut adj = vec![vec![false; n]; n];
    for (i, row) in lower.iter().enumerate() {
        for (j, &e) in row.iter().enumerate() {
            adj[i][j] = e;
            adj[j][i] = e;
        }
    }
    adj
}

fn neighbors(row: &[bool]) -> Vec<usize> {
    row.iter()
        .enumerate()
        .filter(|(_, &e)| e)
        .map(|(j, _)| j)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn incremental_store_matches_scratch(lower in graph_strategy(12)) {
        let mut g = ConflictGraph::new();
        let mut store = CliqueStore::new();
        for row in &lower {
            let node = g.add_node(&neighbors(row));
            let update = store.update_with_node(&g, node);
            for &c in update.created.iter().chain(&update.extended) {
                prop_assert!(store.get(c).members.contains(&node));
            }
            let all: BTreeSet<usize> = (0..g.len()).collect();
            let scratch: Vec<Vec<usize>> = maximal_cliques(&g, &all).into_iter().filter(|c| c.len() >= 2).collect();
            prop_assert_eq!(store.active_sets(), scratch);
        }
        // Every edge lies in some stored clique.
        let sets = store.active_sets();
        for u in 0..g.len() {
            for &v in g.neighbors(u) {
                prop_assert!(sets.iter().any(|c| c.contains(&u) && c.contains(&v)));
            }
        }
        prop_assert!(store.clone().reconcile(&g).is_empty());
    }

    #[test]
    fn tomita_matches_subset_enumeration(lower in graph_strategy(12)) {
        let adj = adjacency(&lower);
        let mut g = ConflictGraph::new();
        for row in &lower {
            g.add_node(&neighbors(row));
        }
        let all: BTreeSet<usize> = (0..g.len()).collect();
        let tomita: Vec<Vec<usize>> = maximal_cliques(&g, &all).into_iter().filter(|c| c.len() >= 2).collect();
        prop_assert_eq!(tomita, common::brute_force_cliques(lower.len(), &adj));
    }
}

#[test]
fn worked_example_extends_and_creates() {
    // a1..a4 are nodes 0..3 with cliques {a1,a2,a3} and {a2,a4}.
    let mut g = ConflictGraph::new();
    let mut store = CliqueStore::new();
    for nb in [&[][..], &[0], &[0, 1], &[1]] {
        let v = g.add_node(nb);
        store.update_with_node(&g, v);
    }
    assert_eq!(store.active_sets(), vec![vec![0, 1, 2], vec![1, 3]]);
    let a24 = store.iter().find(|(_, c)| c.members == [1, 3]).unwrap().0;

    let new = g.add_node(&[0, 1, 3]);
    let update = store.update_with_node(&g, new);
    assert_eq!(update.extended, vec![a24]);
    assert_eq!(store.get(a24).members, vec![1, 3, 4]);
    assert_eq!(update.created.len(), 1);
    assert_eq!(store.get(update.created[0]).members, vec![0, 1, 4]);
    assert!(update.frozen.is_empty());
    assert_eq!(
        store.active_sets(),
        vec![vec![0, 1, 2], vec![0, 1, 4], vec![1, 3, 4]]
    );
}

#[test]
fn reconcile_repairs_a_drifted_store() {
    let mut g = ConflictGraph::new();
    g.add_node(&[]);
    g.add_node(&[0]);
    g.add_node(&[0, 1]);
    let mut store = CliqueStore::new();
    let update = store.reconcile(&g);
    assert_eq!(update.created.len(), 1);
    assert_eq!(store.active_sets(), vec![vec![0, 1, 2]]);
    assert!(store.reconcile(&g).is_empty());
}
