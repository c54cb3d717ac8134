//! Restricted master problem: choose one path per service subject to the
//! clique rows of the conflict graph.
//!
//! The linear relaxation is solved in dual form. It has one row per path and
//! one variable per service and per loaded clique, so the basis stays as
//! small as the column pool. Clique rows are loaded once the relaxation
//! violates them; a row never loaded has a zero dual. The integer
//! master is a depth-first branch-and-bound over one path per service.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use railcg_lp::{Backend, Basis, ColId, LinearProgram, LpError, LpStatus, MipStatus, RowId, Sense};

use thiserror::Error;

use crate::cliques::{CliqueStore, CliqueUpdate};
use crate::path::TrainPath;

#[derive(Debug, Error)]
pub enum MasterError {
    #[error("restricted master is infeasible")]
    Infeasible,
    #[error("restricted master is unbounded")]
    Unbounded,
    #[error("integer master found no selection")]
    NoSelection,
    #[error(transparent)]
    Solver(#[from] LpError),
}

#[derive(Debug, Clone)]
pub struct LpDuals {
    pub objective: f64,
    /// Value per path index.
    pub x: Vec<f64>,
    /// Dual of each service row.
    pub alpha: Vec<f64>,
    /// Nonnegative penalty per clique index; zero for frozen cliques.
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct IntegerSelection {
    pub objective: f64,
    /// Path index chosen for each service.
    pub chosen: Vec<usize>,
    pub status: MipStatus,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct MasterProblem {
    /// `max sum alpha - sum beta` s.t. `alpha_r - sum_{C ni a} beta_C <= c_a`,
    /// stated as a minimisation.
    dual: LinearProgram,
    num_services: usize,
    beta_cols: Vec<Option<ColId>>,
    /// Path indices in each clique.
    members_of: Vec<Vec<usize>>,
    /// Clique indices whose row each path enters.
    rows_of: Vec<Vec<usize>>,
    active: Vec<bool>,
    paths: Vec<TrainPath>,
    costs: Vec<f64>,
    index: HashMap<TrainPath, usize>,
    basis: Option<Basis>,
}

impl MasterProblem {
    pub fn new(num_services: usize) -> Self {
        let mut dual = LinearProgram::new();
        for _ in 0..num_services {
            dual.add_column(-1.0, f64::NEG_INFINITY, f64::INFINITY, &[])
                .expect("no entries");
        }
        Self {
            dual,
            num_services,
            beta_cols: Vec::new(),
            members_of: Vec::new(),
            rows_of: Vec::new(),
            active: Vec::new(),
            paths: Vec::new(),
            costs: Vec::new(),
            index: HashMap::new(),
            basis: None,
        }
    }

    pub fn paths(&self) -> &[TrainPath] {
        &self.paths
    }

    pub fn cost(&self, a: usize) -> f64 {
        self.costs[a]
    }

    pub fn num_columns(&self) -> usize {
        self.paths.len()
    }

    /// Clique rows currently loaded into the relaxation.
    pub fn num_loaded(&self) -> usize {
        self.beta_cols
            .iter()
            .zip(&self.active)
            .filter(|(c, &on)| on && c.is_some())
            .count()
    }

    /// Active clique rows.
    pub fn num_rows(&self) -> usize {
        self.active.iter().filter(|&&b| b).count()
    }

    pub fn contains(&self, path: &TrainPath) -> Option<usize> {
        self.index.get(path).copied()
    }

    /// Clique indices whose row contains path `a`.
    pub fn rows_of(&self, a: usize) -> &[usize] {
        &self.rows_of[a]
    }

    /// The restricted master in primal form: service equality rows, then
    /// the active clique rows in index order, one column per path.
    pub fn primal(&self) -> LinearProgram {
        let mut lp = LinearProgram::new();
        let service_rows: Vec<RowId> = (0..self.num_services)
            .map(|_| lp.add_row(Sense::Eq, 1.0, &[]).expect("empty row"))
            .collect();
        let clique_rows: Vec<Option<RowId>> = self
            .active
            .iter()
            .map(|&on| on.then(|| lp.add_row(Sense::Le, 1.0, &[]).expect("empty row")))
            .collect();
        for (a, p) in self.paths.iter().enumerate() {
            let mut entries = vec![(service_rows[p.service], 1.0)];
            entries.extend(
                self.rows_of[a]
                    .iter()
                    .filter_map(|&c| clique_rows[c])
                    .map(|r| (r, 1.0)),
            );
            lp.add_column(self.costs[a], 0.0, f64::INFINITY, &entries)
                .expect("rows exist");
        }
        lp
    }

    /// Brings clique rows in line with `store` after `update`. Frozen
    /// cliques drop out of the relaxation.
    pub fn sync_cliques(
        &mut self,
        store: &CliqueStore,
        update: &CliqueUpdate,
    ) -> Result<(), LpError> {
        if self.beta_cols.len() < store.len() {
            self.beta_cols.resize(store.len(), None);
            self.members_of.resize(store.len(), Vec::new());
            self.active.resize(store.len(), false);
        }
        for &c in &update.created {
            self.active[c] = true;
            match self.beta_cols[c] {
                Some(col) => self.dual.set_bounds(col, 0.0, f64::INFINITY)?,
                None if self.members_of[c].is_empty() => {
                    let members: Vec<usize> = store
                        .get(c)
                        .members
                        .iter()
                        .copied()
                        .filter(|&a| a < self.paths.len())
                        .collect();
                    for &a in &members {
                        self.rows_of[a].push(c);
                    }
                    self.members_of[c] = members;
                }
                None => {}
            }
        }
        for &c in &update.frozen {
            self.active[c] = false;
            if let Some(col) = self.beta_cols[c] {
                self.dual.set_bounds(col, 0.0, 0.0)?;
            }
        }
        Ok(())
    }

    /// Adds a column for `path`; `cliques` are the clique indices whose
    /// rows it enters. Columns are numbered like the conflict graph nodes.
    pub fn add_path_column(
        &mut self,
        path: TrainPath,
        cost: f64,
        cliques: &[usize],
    ) -> Result<usize, LpError> {
        let a = self.paths.len();
        let mut entries = vec![(ColId(path.service), 1.0)];
        for &c in cliques {
            assert!(
                c < self.members_of.len(),
                "clique rows are created before their columns"
            );
            self.members_of[c].push(a);
            if let Some(col) = self.beta_cols[c] {
                entries.push((col, -1.0));
            }
        }
        let row = self.dual.add_row(Sense::Le, cost, &[])?;
        for (col, v) in entries {
            self.dual.add_entry(row, col, v)?;
        }
        debug_assert_eq!(row.0, a);
        self.index.insert(path.clone(), a);
        self.paths.push(path);
        self.costs.push(cost);
        self.rows_of.push(cliques.to_vec());
        Ok(a)
    }

    pub fn solve_lp(&mut self, backend: &dyn Backend) -> Result<LpDuals, MasterError> {
        let sol = loop {
            let sol = backend.solve_lp(&self.dual, self.basis.as_ref())?;
            log::debug!(
                "master: {} paths, {} of {} clique rows loaded, {} simplex iterations",
                self.paths.len(),
                self.num_loaded(),
                self.num_rows(),
                sol.iterations
            );
            match sol.status {
                LpStatus::Optimal => {}
                // A bounded primal with an unbounded dual has no feasible point.
                LpStatus::Unbounded => return Err(MasterError::Infeasible),
                LpStatus::Infeasible => return Err(MasterError::Unbounded),
            }
            self.basis = Some(sol.basis.clone());
            if self.load_violated(&sol.duals)? == 0 {
                break sol;
            }
        };
        let alpha = sol.x[..self.num_services].to_vec();
        let beta = self
            .beta_cols
            .iter()
            .zip(&self.active)
            .map(|(col, &on)| match col {
                Some(j) if on => sol.x[j.0].max(0.0),
                _ => 0.0,
            })
            .collect();
        let x = sol.duals.iter().map(|y| (-y).max(0.0)).collect();
        Ok(LpDuals {
            objective: -sol.objective,
            x,
            alpha,
            beta,
        })
    }

    /// Loads every active clique row that the point `-duals` violates.
    fn load_violated(&mut self, duals: &[f64]) -> Result<usize, LpError> {
        let mut loaded = 0;
        for c in 0..self.active.len() {
            if !self.active[c] || self.beta_cols[c].is_some() {
                continue;
            }
            let lhs: f64 = self.members_of[c]
                .iter()
                .map(|&a| (-duals[a]).max(0.0))
                .sum();
            if lhs > 1.0 + 1e-7 {
                let entries: Vec<(RowId, f64)> = self.members_of[c]
                    .iter()
                    .map(|&a| (RowId(a), -1.0))
                    .collect();
                self.beta_cols[c] =
                    Some(self.dual.add_column(1.0, 0.0, f64::INFINITY, &entries)?);
                loaded += 1;
            }
        }
        Ok(loaded)
    }

    /// Pairs of paths sharing an active clique row.
    fn conflicts(&self) -> Vec<Vec<bool>> {
        let n = self.paths.len();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.active.len()];
        for (a, rows) in self.rows_of.iter().enumerate() {
            for &c in rows {
                if self.active[c] {
                    members[c].push(a);
                }
            }
        }
        let mut out = vec![vec![false; n]; n];
        for m in &members {
            for (i, &a) in m.iter().enumerate() {
                for &b in &m[i + 1..] {
                    out[a][b] = true;
                    out[b][a] = true;
                }
            }
        }
        out
    }

    /// Integer master over all current columns: depth-first over services
    /// with the fewest candidates first, bounded by the cheapest compatible
    /// path of every open service.
    pub fn solve_integer(
        &self,
        hint: Option<&[usize]>,
        gap_target: f64,
        time_limit: Option<Duration>,
    ) -> Result<IntegerSelection, MasterError> {
        let deadline = time_limit.map(|d| Instant::now() + d);
        let conflicts = self.conflicts();
        let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); self.num_services];
        for (a, p) in self.paths.iter().enumerate() {
            candidates[p.service].push(a);
        }
        for c in &mut candidates {
            c.sort_by(|&a, &b| self.costs[a].total_cmp(&self.costs[b]).then(a.cmp(&b)));
        }
        let mut order: Vec<usize> = (0..self.num_services).collect();
        order.sort_by_key(|&r| (candidates[r].len(), r));
        let root: f64 = candidates
            .iter()
            .map(|c| c.first().map_or(f64::INFINITY, |&a| self.costs[a]))
            .sum();

        let mut search = Search {
            master: self,
            conflicts: &conflicts,
            candidates: &candidates,
            order: &order,
            best: f64::INFINITY,
            best_chosen: Vec::new(),
            gap_target,
            deadline,
            timed_out: false,
            nodes: 0,
        };
        if let Some(h) = hint {
            let ok = h.len() == self.num_services
                && h.iter()
                    .enumerate()
                    .all(|(r, &a)| a < self.paths.len() && self.paths[a].service == r)
                && h.iter()
                    .enumerate()
                    .all(|(i, &a)| h[i + 1..].iter().all(|&b| !conflicts[a][b]));
            if ok {
                search.best = h.iter().map(|&a| self.costs[a]).sum();
                search.best_chosen = h.to_vec();
            }
        }
        let mut chosen = vec![usize::MAX; self.num_services];
        search.dive(0, 0.0, &mut chosen);
        if search.best_chosen.is_empty() {
            return Err(MasterError::NoSelection);
        }
        let (status, bound) = if search.timed_out {
            (MipStatus::TimeLimit, root.min(search.best))
        } else if gap_target > 0.0 {
            (
                MipStatus::Feasible,
                (search.best - gap_target * search.best.abs().max(1.0))
                    .max(root)
                    .min(search.best),
            )
        } else {
            (MipStatus::Optimal, search.best)
        };
        Ok(IntegerSelection {
            objective: search.best,
            chosen: search.best_chosen,
            status,
            bound,
        })
    }
}

struct Search<'a> {
    master: &'a MasterProblem,
    conflicts: &'a [Vec<bool>],
    candidates: &'a [Vec<usize>],
    order: &'a [usize],
    best: f64,
    best_chosen: Vec<usize>,
    gap_target: f64,
    deadline: Option<Instant>,
    timed_out: bool,
    nodes: u64,
}

impl Search<'_> {
    fn compatible(&self, a: usize, chosen: &[usize], depth: usize) -> bool {
        self.order[..depth]
            .iter()
            .all(|&r| !self.conflicts[a][chosen[r]])
    }

    fn dive(&mut self, depth: usize, cost: f64, chosen: &mut Vec<usize>) {
        self.nodes += 1;
        if self.nodes % 1024 == 0 && self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.timed_out = true;
        }
        if self.timed_out {
            return;
        }
        if depth == self.order.len() {
            if cost < self.best {
                self.best = cost;
                self.best_chosen = chosen.clone();
            }
            return;
        }
        let mut bound = cost;
        for &r in &self.order[depth..] {
            let cheapest = self.candidates[r]
                .iter()
                .find(|&&a| self.compatible(a, chosen, depth))
                .map_or(f64::INFINITY, |&a| self.master.costs[a]);
            bound += cheapest;
        }
        if bound >= self.best - 1e-9 - self.gap_target * self.best.abs().max(1.0) {
            return;
        }
        let r = self.order[depth];
        for k in 0..self.candidates[r].len() {
            let a = self.candidates[r][k];
            if !self.compatible(a, chosen, depth) {
                continue;
            }
            chosen[r] = a;
            self.dive(depth + 1, cost + self.master.costs[a], chosen);
            chosen[r] = usize::MAX;
        }
    }
}
