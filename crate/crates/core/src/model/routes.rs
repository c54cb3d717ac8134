//! Loop-free k-shortest routes between dispatching points (Yen's algorithm).

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use super::{ModelError, Network};

/// Block sequence from the origin point's block to the destination point's
/// block. `length` counts every block except the first, on which the train
/// stands before departure.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub blocks: Vec<usize>,
    pub length: f64,
}

#[derive(PartialEq)]
struct Cand {
    length: f64,
    blocks: Vec<usize>,
}

impl Eq for Cand {}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.length
            .total_cmp(&other.length)
            .then_with(|| self.blocks.cmp(&other.blocks))
    }
}

fn route_length(net: &Network, blocks: &[usize]) -> f64 {
    blocks.iter().skip(1).map(|&b| net.block(b).length).sum()
}

fn dijkstra(
    net: &Network,
    source: usize,
    target: usize,
    banned_nodes: &HashSet<usize>,
    banned_edges: &HashSet<(usize, usize)>,
) -> Option<Vec<usize>> {
    let n = net.num_blocks();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(std::cmp::Reverse(Cand {
        length: 0.0,
        blocks: vec![source],
    }));
    while let Some(std::cmp::Reverse(Cand { length, blocks })) = heap.pop() {
        let u = *blocks.last().expect("nonempty");
        if length > dist[u] {
            continue;
        }
        if u == target {
            break;
        }
        for &v in net.successors(u) {
            if banned_nodes.contains(&v) || banned_edges.contains(&(u, v)) {
                continue;
            }
            let nd = length + net.block(v).length;
            if nd < dist[v] || (nd == dist[v] && u < prev[v]) {
                dist[v] = nd;
                prev[v] = u;
                heap.push(std::cmp::Reverse(Cand {
                    length: nd,
                    blocks: vec![v],
                }));
            }
        }
    }
    if !dist[target].is_finite() {
        return None;
    }
    let mut path = vec![target];
    let mut cur = target;
    while cur != source {
        cur = prev[cur];
        path.push(cur);
    }
    path.reverse();
    Some(path)
}

/// Up to `k` loop-free routes ordered by length, each at most `rho` times
/// the shortest one.
pub fn k_shortest_routes(
    net: &Network,
    from: usize,
    to: usize,
    k: usize,
    rho: f64,
) -> Result<Vec<Route>, ModelError> {
    let source = net.point_block(from);
    let target = net.point_block(to);
    let no_route = || ModelError::NoRoute {
        from: net.point(from).id.clone(),
        to: net.point(to).id.clone(),
    };
    let first =
        dijkstra(net, source, target, &HashSet::new(), &HashSet::new()).ok_or_else(no_route)?;
    let shortest = route_length(net, &first);
    let limit = rho * shortest + 1e-9;
    let mut accepted = vec![first];
    let mut candidates: BTreeSet<Cand> = BTreeSet::new();

    while accepted.len() < k {
        let last = accepted.last().expect("nonempty").clone();
        for i in 0..last.len().saturating_sub(1) {
            let spur = last[i];
            let root = &last[..=i];
            let banned_edges: HashSet<(usize, usize)> = accepted
                .iter()
                .filter(|p| p.len() > i + 1 && &p[..=i] == root)
                .map(|p| (p[i], p[i + 1]))
                .collect();
            let banned_nodes: HashSet<usize> = root[..i].iter().copied().collect();
            if let Some(tail) = dijkstra(net, spur, target, &banned_nodes, &banned_edges) {
                let mut blocks = root[..i].to_vec();
                blocks.extend(tail);
                let cand = Cand {
                    length: route_length(net, &blocks),
                    blocks,
                };
                if !accepted.contains(&cand.blocks) {
                    candidates.insert(cand);
                }
            }
        }
        match candidates.pop_first() {
            Some(c) if c.length <= limit => accepted.push(c.blocks),
            _ => break,
        }
    }

    Ok(accepted
        .into_iter()
        .map(|blocks| Route {
            length: route_length(net, &blocks),
            blocks,
        })
        .collect())
}
