//! Best-bound branch-and-bound over the simplex.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use log::{debug, warn};

use crate::simplex::{solve_with_bounds, Basis, LpStatus};
use crate::{LpError, MipModel, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    /// Incumbent proven optimal.
    Optimal,
    /// Stopped once the relative gap reached the requested target.
    Feasible,
    Infeasible,
    Unbounded,
    /// Time or node limit hit; an incumbent may or may not exist.
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct MipOptions {
    /// Stop when `(incumbent - bound) / max(1, |incumbent|)` falls to this value.
    pub gap_target: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    /// Candidate solution checked for feasibility before the search.
    pub incumbent_hint: Option<Vec<f64>>,
    pub tolerances: Tolerances,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self {
            gap_target: 0.0,
            time_limit: None,
            node_limit: None,
            incumbent_hint: None,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MipSolution {
    pub status: MipStatus,
    /// Incumbent values, if one was found.
    pub x: Option<Vec<f64>>,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    /// Branch-and-bound nodes explored beyond the root.
    pub nodes: usize,
    /// Root relaxation objective.
    pub root_bound: f64,
}

impl MipSolution {
    pub fn has_incumbent(&self) -> bool {
        self.x.is_some()
    }
}

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    basis: Basis,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the best node compares greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

pub(crate) fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() {
        return f64::INFINITY;
    }
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

fn most_fractional(x: &[f64], integer: &[bool], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&v, &int)) in x.iter().zip(integer).enumerate() {
        if !int {
            continue;
        }
        let frac = v - v.floor();
        let dist = frac.min(1.0 - frac);
        if dist > tol && best.is_none_or(|(_, d)| dist > d + 1e-12) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

fn round_integers(x: &mut [f64], integer: &[bool]) {
    for (v, &int) in x.iter_mut().zip(integer) {
        if int {
            *v = v.round();
        }
    }
}

pub fn solve_mip(mip: &MipModel, options: &MipOptions) -> Result<MipSolution, LpError> {
    let start = Instant::now();
    let tol = options.tolerances;
    let lp = &mip.lp;
    let integer = mip.integer_flags();
    let mut lower: Vec<f64> = lp.cols.iter().map(|c| c.lower).collect();
    let mut upper: Vec<f64> = lp.cols.iter().map(|c| c.upper).collect();
    for j in 0..lower.len() {
        if integer[j] {
            lower[j] = (lower[j] - tol.integrality).ceil();
            upper[j] = (upper[j] + tol.integrality).floor();
        }
    }

    let mut incumbent: Option<Vec<f64>> = None;
    let mut inc_obj = f64::INFINITY;
    if let Some(hint) = &options.incumbent_hint {
        if hint.len() == lp.num_cols() {
            let mut h = hint.clone();
            round_integers(&mut h, integer);
            let within = h
                .iter()
                .zip(lower.iter().zip(&upper))
                .all(|(v, (l, u))| *v >= l - tol.feasibility && *v <= u + tol.feasibility);
            if within && lp.max_violation(&h) <= tol.feasibility * 10.0 {
                inc_obj = lp.objective_value(&h);
                incumbent = Some(h);
            } else {
                debug!("incumbent hint rejected");
            }
        }
    }

    if lower.iter().zip(&upper).any(|(l, u)| l > u) {
        return Ok(finish(
            MipStatus::Infeasible,
            None,
            f64::INFINITY,
            f64::INFINITY,
            0,
            f64::INFINITY,
        ));
    }

    let root = solve_with_bounds(lp, &lower, &upper, None, &tol)?;
    match root.status {
        LpStatus::Infeasible => {
            return Ok(finish(
                MipStatus::Infeasible,
                None,
                f64::INFINITY,
                f64::INFINITY,
                0,
                f64::INFINITY,
            ))
        }
        LpStatus::Unbounded => {
            return Ok(finish(
                MipStatus::Unbounded,
                None,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
                0,
                f64::NEG_INFINITY,
            ))
        }
        LpStatus::Optimal => {}
    }
    let root_bound = root.objective;

    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let mut nodes = 0usize;
    let mut limit_hit = false;
    let mut first = Some(root);
    heap.push(Node {
        bound: root_bound,
        depth: 0,
        seq,
        lower,
        upper,
        basis: Basis::default(),
    });

    let prune_tol = |inc: f64| 1e-9 * inc.abs().max(1.0);

    while let Some(node) = heap.pop() {
        if node.bound >= inc_obj - prune_tol(inc_obj) {
            continue;
        }
        if relative_gap(inc_obj, node.bound) <= options.gap_target && options.gap_target > 0.0 {
            heap.push(node);
            break;
        }
        let over_time = options.time_limit.is_some_and(|t| start.elapsed() >= t);
        let over_nodes = options.node_limit.is_some_and(|n| nodes >= n);
        if over_time || over_nodes {
            heap.push(node);
            limit_hit = true;
            break;
        }

        let sol = match first.take() {
            Some(s) => s,
            None => {
                nodes += 1;
                match solve_with_bounds(lp, &node.lower, &node.upper, Some(&node.basis), &tol) {
                    Ok(s) => s,
                    Err(LpError::IterationLimit(k)) => {
                        warn!("node LP hit the iteration limit ({k}); retrying cold");
                        solve_with_bounds(lp, &node.lower, &node.upper, None, &tol)?
                    }
                    Err(e) => return Err(e),
                }
            }
        };
        if sol.status != LpStatus::Optimal {
            continue;
        }
        let bound = sol.objective.max(node.bound);
        if bound >= inc_obj - prune_tol(inc_obj) {
            continue;
        }
        match most_fractional(&sol.x, integer, tol.integrality) {
            None => {
                let mut x = sol.x;
                round_integers(&mut x, integer);
                let obj = lp.objective_value(&x);
                if obj < inc_obj {
                    debug!("new incumbent {obj} at node {nodes}");
                    inc_obj = obj;
                    incumbent = Some(x);
                }
            }
            Some(j) => {
                let v = sol.x[j];
                let mut down_upper = node.upper.clone();
                down_upper[j] = v.floor();
                let mut up_lower = node.lower.clone();
                up_lower[j] = v.ceil();
                seq += 1;
                heap.push(Node {
                    bound,
                    depth: node.depth + 1,
                    seq,
                    lower: node.lower.clone(),
                    upper: down_upper,
                    basis: sol.basis.clone(),
                });
                seq += 1;
                heap.push(Node {
                    bound,
                    depth: node.depth + 1,
                    seq,
                    lower: up_lower,
                    upper: node.upper,
                    basis: sol.basis,
                });
            }
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let best_bound = open_bound.min(inc_obj);
    let gap = relative_gap(inc_obj, best_bound);
    let status = if incumbent.is_none() {
        if limit_hit {
            MipStatus::TimeLimit
        } else {
            MipStatus::Infeasible
        }
    } else if heap.is_empty() || gap <= 0.0 {
        MipStatus::Optimal
    } else if limit_hit {
        MipStatus::TimeLimit
    } else {
        MipStatus::Feasible
    };
    Ok(finish(
        status, incumbent, inc_obj, best_bound, nodes, root_bound,
    ))
}

fn finish(
    status: MipStatus,
    x: Option<Vec<f64>>,
    objective: f64,
    best_bound: f64,
    nodes: usize,
    root_bound: f64,
) -> MipSolution {
    let gap = if x.is_some() {
        relative_gap(objective, best_bound)
    } else {
        f64::INFINITY
    };
    MipSolution {
        status,
        x,
        objective,
        best_bound,
        gap,
        nodes,
        root_bound,
    }
}
