//! Grows a conflict graph node by node and shows how maximal cliques are
//! created and extended.

use railcg::cliques::{CliqueStore, ConflictGraph};

fn main() {
    let mut graph = ConflictGraph::new();
    let mut store = CliqueStore::new();
    let neighbors: [&[usize]; 5] = [&[], &[0], &[0, 1], &[1], &[0, 1, 3]];
    for nb in neighbors {
        let v = graph.add_node(nb);
        let update = store.update_with_node(&graph, v);
        println!(
            "node {v} adjacent to {nb:?}: created {:?}, extended {:?}, frozen {:?}",
            update
                .created
                .iter()
                .map(|&c| &store.get(c).members)
                .collect::<Vec<_>>(),
            update
                .extended
                .iter()
                .map(|&c| &store.get(c).members)
                .collect::<Vec<_>>(),
            update.frozen
        );
    }
    println!("maximal cliques: {:?}", store.active_sets());
}
