//! Conflict graph over train paths and its maximal cliques.

use std::collections::{BTreeSet, HashMap};

/// Undirected graph on nodes `0..n`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConflictGraph {
    adj: Vec<BTreeSet<usize>>,
}

impl ConflictGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Adds a node adjacent to `neighbors` and returns its index.
    pub fn add_node(&mut self, neighbors: &[usize]) -> usize {
        let id = self.adj.len();
        self.adj.push(neighbors.iter().copied().collect());
        for &u in neighbors {
            assert!(u < id, "neighbor {u} does not exist");
            self.adj[u].insert(id);
        }
        id
    }

    pub fn neighbors(&self, u: usize) -> &BTreeSet<usize> {
        &self.adj[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].contains(&v)
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(|s| s.len()).sum::<usize>() / 2
    }

    pub fn is_clique(&self, nodes: &[usize]) -> bool {
        nodes
            .iter()
            .enumerate()
            .all(|(i, &u)| nodes[i + 1..].iter().all(|&v| self.has_edge(u, v)))
    }
}

/// All maximal cliques of the subgraph induced by `vertices`, each sorted,
/// in lexicographic order (Bron-Kerbosch with Tomita pivoting).
pub fn maximal_cliques(g: &ConflictGraph, vertices: &BTreeSet<usize>) -> Vec<Vec<usize>> {
    fn expand(
        g: &ConflictGraph,
        r: &mut Vec<usize>,
        p: BTreeSet<usize>,
        mut x: BTreeSet<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if p.is_empty() {
            if x.is_empty() {
                let mut c = r.clone();
                c.sort_unstable();
                out.push(c);
            }
            return;
        }
        let pivot = p
            .iter()
            .chain(x.iter())
            .copied()
            .max_by_key(|&u| {
                (
                    p.iter().filter(|v| g.has_edge(u, **v)).count(),
                    std::cmp::Reverse(u),
                )
            })
            .expect("p is nonempty");
        let candidates: Vec<usize> = p
            .iter()
            .copied()
            .filter(|&v| !g.has_edge(pivot, v))
            .collect();
        let mut p = p;
        for v in candidates {
            let nv = g.neighbors(v);
            r.push(v);
            expand(
                g,
                r,
                p.iter().copied().filter(|u| nv.contains(u)).collect(),
                x.iter().copied().filter(|u| nv.contains(u)).collect(),
                out,
            );
            r.pop();
            p.remove(&v);
            x.insert(v);
        }
    }
    let mut out = Vec::new();
    expand(
        g,
        &mut Vec::new(),
        vertices.clone(),
        BTreeSet::new(),
        &mut out,
    );
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clique {
    /// Sorted node indices.
    pub members: Vec<usize>,
    pub active: bool,
}

/// What one insertion changed, by clique index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CliqueUpdate {
    pub created: Vec<usize>,
    pub extended: Vec<usize>,
    pub frozen: Vec<usize>,
}

impl CliqueUpdate {
    pub fn is_empty(&self) -> bool {
        self.created.is_empty() && self.extended.is_empty() && self.frozen.is_empty()
    }
}

/// Maximal cliques with at least two nodes, maintained as nodes are added.
///
/// Cliques are never removed, so indices stay valid; a clique that stops
/// being maximal is frozen instead.
#[derive(Debug, Clone, Default)]
pub struct CliqueStore {
    cliques: Vec<Clique>,
    index: HashMap<Vec<usize>, usize>,
}

impl CliqueStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn get(&self, c: usize) -> &Clique {
        &self.cliques[c]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Clique)> {
        self.cliques.iter().enumerate()
    }

    pub fn num_active(&self) -> usize {
        self.cliques.iter().filter(|c| c.active).count()
    }

    /// Sorted member lists of the active cliques, in lexicographic order.
    pub fn active_sets(&self) -> Vec<Vec<usize>> {
        let mut v: Vec<Vec<usize>> = self
            .cliques
            .iter()
            .filter(|c| c.active)
            .map(|c| c.members.clone())
            .collect();
        v.sort();
        v
    }

    fn create(&mut self, members: Vec<usize>) -> usize {
        if let Some(&i) = self.index.get(&members) {
            self.cliques[i].active = true;
            return i;
        }
        let i = self.cliques.len();
        self.index.insert(members.clone(), i);
        self.cliques.push(Clique {
            members,
            active: true,
        });
        i
    }

    /// Updates the store after `node` was added to `g`.
    ///
    /// Every new maximal clique is `node` plus a maximal clique `K` of its
    /// neighbourhood. An old maximal clique inside one of them must be `K`
    /// itself, which is then extended in place; nothing else changes.
    pub fn update_with_node(&mut self, g: &ConflictGraph, node: usize) -> CliqueUpdate {
        let mut update = CliqueUpdate::default();
        let n = g.neighbors(node);
        if n.is_empty() {
            return update;
        }
        for c in maximal_cliques(g, n) {
            let existing = self
                .index
                .get(&c)
                .copied()
                .filter(|&i| self.cliques[i].active);
            let mut grown = c.clone();
            grown.push(node);
            grown.sort_unstable();
            match existing {
                Some(i) => {
                    self.index.remove(&c);
                    self.index.insert(grown.clone(), i);
                    self.cliques[i].members = grown;
                    update.extended.push(i);
                }
                None => {
                    let i = self.create(grown.clone());
                    update.created.push(i);
                }
            }
        }
        update
    }

    /// Recomputes the maximal cliques from scratch and brings the store in
    /// line, returning what had to change.
    pub fn reconcile(&mut self, g: &ConflictGraph) -> CliqueUpdate {
        let all: BTreeSet<usize> = (0..g.len()).collect();
        let truth: BTreeSet<Vec<usize>> = maximal_cliques(g, &all)
            .into_iter()
            .filter(|c| c.len() >= 2)
            .collect();
        let mut update = CliqueUpdate::default();
        for (i, c) in self.cliques.iter_mut().enumerate() {
            if c.active && !truth.contains(&c.members) {
                c.active = false;
                update.frozen.push(i);
            }
        }
        for c in truth {
            let present = self.index.get(&c).is_some_and(|&i| self.cliques[i].active);
            if !present {
                update.created.push(self.create(c));
            }
        }
        if !update.is_empty() {
            log::warn!(
                "clique store drifted: {} created, {} frozen on reconcile",
                update.created.len(),
                update.frozen.len()
            );
        }
        update
    }
}
