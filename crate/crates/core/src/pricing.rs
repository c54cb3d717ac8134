//! Pricing: the cheapest train path of one service against fixed opposing
//! paths.
//!
//! Each opposing path either carries clique penalties or must be avoided
//! outright. A clique's penalty is paid by a path that conflicts with every
//! member of another service. When the conflict graph joins paths of one
//! service, members of the priced service count as conflicting; otherwise
//! a clique holding such a member is paid only by a path equal to it.
//! The problem is available as an exact combinatorial search and as a
//! mixed-integer program over speed-profile chains. Both see the same
//! conflict windows; the program leaves out cliques paid only by an equal
//! path and so only bounds the search from below.

use std::collections::{BTreeSet, HashMap};
use std::time::Duration;

use railcg_lp::{Backend, ColId, LpError, MipModel, MipOptions, MipStatus, RowId, Sense};
use thiserror::Error;

use crate::conflicts::ConflictCatalog;
use crate::model::{Time, TrainService};
use crate::path::TrainPath;
use crate::profiles::{ProfileId, ProfileSet, ProfileStore};

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("service `{0}`: no conflict-free path up to the planning horizon")]
    Infeasible(String),
    #[error("service `{service}`: solver returned a path conflicting with fixed path {path}")]
    StartFailure { service: String, path: usize },
    #[error(transparent)]
    Solver(#[from] LpError),
}

/// Everything pricing needs that does not change between iterations.
#[derive(Clone, Copy)]
pub struct Pricer<'a> {
    pub services: &'a [TrainService],
    pub sets: &'a [ProfileSet],
    pub store: &'a ProfileStore,
    pub catalog: &'a ConflictCatalog,
    /// Latest admissible exit time.
    pub t_max: Time,
    /// Charge early arrival as negative delay.
    pub unclipped: bool,
    pub backend: &'a dyn Backend,
    pub engine: PricingEngine,
    /// The conflict graph also joins paths of the same service.
    pub service_edges: bool,
}

/// One pricing call.
#[derive(Debug, Clone, Default)]
pub struct PricingRequest<'a> {
    pub service: usize,
    /// Dual of the service's convexity row.
    pub alpha: f64,
    /// Cliques as path ids with their nonnegative penalties.
    pub cliques: Vec<(&'a [usize], f64)>,
    /// Paths the new path must not conflict with.
    pub forbidden: Vec<usize>,
    pub time_limit: Option<Duration>,
    pub gap_target: f64,
}

#[derive(Debug, Clone)]
pub struct PricingOutcome {
    pub path: Option<TrainPath>,
    /// Delay cost of `path`.
    pub cost: f64,
    /// Reduced cost of `path` from verified conflicts.
    pub reduced_cost: f64,
    /// Lower bound on the reduced cost of every path of the service.
    pub bound: f64,
    /// Opposing path ids the new path conflicts with.
    pub conflicts: Vec<usize>,
    /// Verified conflicts the model did not flag; nonzero means the model
    /// under-approximates conflicts.
    pub unflagged: usize,
    pub status: MipStatus,
    pub nodes: usize,
}

/// Static earliest departure and latest departure per profile.
#[derive(Debug, Clone)]
pub struct TimeWindows {
    pub lb: HashMap<ProfileId, Time>,
    pub ub: HashMap<ProfileId, Time>,
    /// Shortest remaining run time to the exit.
    pub rem: HashMap<ProfileId, Time>,
}

impl TimeWindows {
    pub fn new(set: &ProfileSet, store: &ProfileStore, earliest: Time, t_max: Time) -> Self {
        let mut order = set.profiles.clone();
        order.sort_by_key(|&v| (store.get(v).stage.leg, store.get(v).stage.part, v));
        let mut lb: HashMap<ProfileId, Time> = HashMap::new();
        for &v in &order {
            if set.is_start(v) {
                lb.insert(v, earliest);
            }
        }
        for &v in &order {
            let Some(&t) = lb.get(&v) else { continue };
            let f = store.get(v).run_time;
            for &w in set.successors_of(v) {
                let e = lb.entry(w).or_insert(Time::MAX);
                *e = (*e).min(t + f);
            }
        }
        let mut rem: HashMap<ProfileId, Time> = HashMap::new();
        for &v in order.iter().rev() {
            let f = store.get(v).run_time;
            let tail = set
                .successors_of(v)
                .iter()
                .filter_map(|w| rem.get(w))
                .min()
                .copied();
            let r = match (set.is_end(v), tail) {
                (true, _) => f,
                (false, Some(t)) => f + t,
                (false, None) => Time::MAX / 4,
            };
            rem.insert(v, r);
        }
        let ub = rem.iter().map(|(&v, &r)| (v, t_max - r)).collect();
        Self { lb, ub, rem }
    }

    /// Upper end of the window, never below its lower end.
    pub fn hi(&self, v: ProfileId) -> Time {
        self.ub[&v].max(self.lb[&v])
    }
}

/// Column handles of a built pricing model.
pub struct PricingModel {
    pub mip: MipModel,
    pub y: HashMap<ProfileId, ColId>,
    pub t: HashMap<ProfileId, ColId>,
    pub arcs: HashMap<(ProfileId, ProfileId), ColId>,
    pub t_exit: ColId,
    /// Conflict indicator per opposing path id.
    pub z_path: Vec<(usize, ColId)>,
    pub z_clique: Vec<ColId>,
}

/// Own profile `v` conflicts with opposing path `opposing` when it departs
/// within `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub opposing: usize,
    pub lo: Time,
    pub hi: Time,
}

/// Waiting between own profiles `w` and `w2` conflicts with opposing path
/// `opposing` when `t_w <= depart_by` and `t_w2 >= leave_from`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HaltWindow {
    pub opposing: usize,
    pub depart_by: Time,
    pub leave_from: Time,
}

/// Conflict structure of one pricing call; opposing paths are referred to
/// by their position in `opposing`.
#[derive(Debug, Clone)]
pub struct Conditions {
    /// Path ids.
    pub opposing: Vec<usize>,
    pub forbidden: Vec<bool>,
    pub windows: HashMap<ProfileId, Vec<Window>>,
    pub halts: HashMap<(ProfileId, ProfileId), Vec<HaltWindow>>,
    /// Members as opposing positions and penalty of each priced clique
    /// without a path of this service.
    pub cliques: Vec<(Vec<usize>, f64)>,
    /// Priced cliques holding a path of this service.
    pub own_cliques: Vec<OwnClique>,
}

/// Clique whose penalty only the path `steps` itself can pay.
#[derive(Debug, Clone)]
pub struct OwnClique {
    pub others: Vec<usize>,
    pub steps: Vec<(ProfileId, Time)>,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PricingEngine {
    /// Exact search over candidate departure times.
    #[default]
    Search,
    /// Branch-and-bound on the mixed-integer formulation.
    Mip,
}

/// Activation of one side of a conflict window.
#[derive(Clone, Copy)]
enum Side {
    Never,
    Always,
    Var(ColId),
}

impl<'a> Pricer<'a> {
    pub fn windows(&self, service: usize) -> TimeWindows {
        TimeWindows::new(
            &self.sets[service],
            self.store,
            self.services[service].earliest_departure(),
            self.t_max,
        )
    }

    /// Pricing MIP for service `r` under `cond`.
    pub fn build(&self, r: usize, cond: &Conditions) -> Result<PricingModel, LpError> {
        let set = &self.sets[r];
        let service = &self.services[r];
        let tw = self.windows(r);
        let mut mip = MipModel::new();

        let start_row = mip.add_row(Sense::Eq, 1.0, &[])?;
        let mut y = HashMap::new();
        let mut t = HashMap::new();
        for &v in &set.profiles {
            let (lb, ub) = (tw.lb[&v], tw.ub[&v]);
            let usable = lb <= ub;
            let yv = mip.add_column(0.0, 0.0, if usable { 1.0 } else { 0.0 }, true, &[])?;
            if set.is_start(v) {
                mip.lp.add_entry(start_row, yv, 1.0)?;
            }
            let tv = mip.add_column(0.0, lb as f64, ub.max(lb) as f64, false, &[])?;
            y.insert(v, yv);
            t.insert(v, tv);
        }

        let mut arcs = HashMap::new();
        let mut inflow: HashMap<ProfileId, Vec<(ColId, f64)>> = HashMap::new();
        for &v in &set.profiles {
            let succ = set.successors_of(v);
            if succ.is_empty() {
                continue;
            }
            let mut out = vec![(y[&v], -1.0)];
            let f = self.store.get(v).run_time;
            for &w in succ {
                let x = mip.add_column(0.0, 0.0, 1.0, true, &[])?;
                arcs.insert((v, w), x);
                out.push((x, 1.0));
                inflow.entry(w).or_default().push((x, 1.0));
                // t_w >= t_v + f_v - M (1 - x)
                let m = tw.hi(v) + f - tw.lb[&w];
                if m > 0 {
                    mip.add_row(
                        Sense::Ge,
                        (f - m) as f64,
                        &[(t[&w], 1.0), (t[&v], -1.0), (x, -(m as f64))],
                    )?;
                }
            }
            if !set.is_end(v) {
                mip.add_row(Sense::Eq, 0.0, &out)?;
            } else {
                mip.add_row(Sense::Le, 0.0, &out)?;
            }
        }
        for &v in &set.profiles {
            if set.is_start(v) {
                continue;
            }
            let mut row = inflow.remove(&v).unwrap_or_default();
            row.push((y[&v], -1.0));
            mip.add_row(Sense::Eq, 0.0, &row)?;
        }

        let end_lb = set
            .end
            .iter()
            .map(|v| tw.lb[v] + self.store.get(*v).run_time)
            .min()
            .unwrap_or(0);
        let exit_cost = if self.unclipped { 1.0 } else { 0.0 };
        let t_exit = mip.add_column(
            exit_cost,
            end_lb as f64,
            self.t_max.max(end_lb) as f64,
            false,
            &[],
        )?;
        for &v in &set.end {
            let f = self.store.get(v).run_time;
            let m = tw.hi(v) + f - end_lb;
            if m > 0 {
                mip.add_row(
                    Sense::Ge,
                    (f - m) as f64,
                    &[(t_exit, 1.0), (t[&v], -1.0), (y[&v], -(m as f64))],
                )?;
            }
        }
        if !self.unclipped {
            let delay = mip.add_column(1.0, 0.0, f64::INFINITY, false, &[])?;
            mip.add_row(
                Sense::Ge,
                -(service.scheduled_exit as f64),
                &[(delay, 1.0), (t_exit, -1.0)],
            )?;
        }

        let mut z_path = Vec::new();
        for (i, &a) in cond.opposing.iter().enumerate() {
            let upper = if cond.forbidden[i] { 0.0 } else { 1.0 };
            z_path.push((a, mip.add_column(0.0, 0.0, upper, false, &[])?));
        }
        for (&v, windows) in &cond.windows {
            let (lb, ub) = (tw.lb[&v], tw.ub[&v]);
            if lb > ub {
                continue;
            }
            for win in windows {
                let (l, u) = (win.lo, win.hi);
                // zl = 1 if y_v and t_v >= l
                let zl = if ub < l {
                    Side::Never
                } else if lb >= l {
                    Side::Always
                } else {
                    let m = (ub - (l - 1)) as f64;
                    let z = mip.add_column(0.0, 0.0, 1.0, true, &[])?;
                    mip.add_row(
                        Sense::Le,
                        (l - 1) as f64 + m,
                        &[(t[&v], 1.0), (z, -m), (y[&v], m)],
                    )?;
                    Side::Var(z)
                };
                // zu = 1 if y_v and t_v <= u
                let zu = if lb > u {
                    Side::Never
                } else if ub <= u {
                    Side::Always
                } else {
                    let m = (u + 1 - lb) as f64;
                    let z = mip.add_column(0.0, 0.0, 1.0, true, &[])?;
                    mip.add_row(
                        Sense::Ge,
                        (u + 1) as f64 - m,
                        &[(t[&v], 1.0), (z, m), (y[&v], -m)],
                    )?;
                    Side::Var(z)
                };
                link(&mut mip, z_path[win.opposing].1, y[&v], zl, zu)?;
            }
        }
        for (&(w, w2), halts) in &cond.halts {
            let x = arcs[&(w, w2)];
            let (lbw, ubw) = (tw.lb[&w], tw.ub[&w]);
            let (lbn, ubn) = (tw.lb[&w2], tw.ub[&w2]);
            if lbw > ubw || lbn > ubn {
                continue;
            }
            for h in halts {
                // zl = 1 if x and t_w <= a
                let zl = if lbw > h.depart_by {
                    Side::Never
                } else if ubw <= h.depart_by {
                    Side::Always
                } else {
                    let m = (h.depart_by + 1 - lbw) as f64;
                    let z = mip.add_column(0.0, 0.0, 1.0, true, &[])?;
                    mip.add_row(
                        Sense::Ge,
                        (h.depart_by + 1) as f64 - m,
                        &[(t[&w], 1.0), (z, m), (x, -m)],
                    )?;
                    Side::Var(z)
                };
                // zu = 1 if x and t_w2 >= b
                let zu = if ubn < h.leave_from {
                    Side::Never
                } else if lbn >= h.leave_from {
                    Side::Always
                } else {
                    let m = (ubn - (h.leave_from - 1)) as f64;
                    let z = mip.add_column(0.0, 0.0, 1.0, true, &[])?;
                    mip.add_row(
                        Sense::Le,
                        (h.leave_from - 1) as f64 + m,
                        &[(t[&w2], 1.0), (z, -m), (x, m)],
                    )?;
                    Side::Var(z)
                };
                link(&mut mip, z_path[h.opposing].1, x, zl, zu)?;
            }
        }

        let mut z_clique = Vec::new();
        for (members, beta) in &cond.cliques {
            let zc = mip.add_column(*beta, 0.0, 1.0, false, &[])?;
            let mut row = vec![(zc, 1.0)];
            row.extend(members.iter().map(|&i| (z_path[i].1, -1.0)));
            mip.add_row(Sense::Ge, 1.0 - members.len() as f64, &row)?;
            z_clique.push(zc);
        }

        Ok(PricingModel {
            mip,
            y,
            t,
            arcs,
            t_exit,
            z_path,
            z_clique,
        })
    }

    /// Conflict windows of service `req.service` against the opposing paths.
    pub fn conditions(&self, req: &PricingRequest, pool: &[TrainPath]) -> Conditions {
        let r = req.service;
        let set = &self.sets[r];
        let cat = self.catalog;
        let mut ids: BTreeSet<usize> = req.forbidden.iter().copied().collect();
        let own_member = |m: &[usize]| m.iter().copied().find(|&a| pool[a].service == r);
        for (members, beta) in &req.cliques {
            if *beta > 0.0 {
                ids.extend(members.iter().copied().filter(|&a| pool[a].service != r));
            }
        }

        let opposing: Vec<usize> = ids.into_iter().collect();
        let position: HashMap<usize, usize> =
            opposing.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        let forbidden = opposing.iter().map(|a| req.forbidden.contains(a)).collect();

        let mut windows: HashMap<ProfileId, Vec<Window>> = HashMap::new();
        let mut halts: HashMap<(ProfileId, ProfileId), Vec<HaltWindow>> = HashMap::new();
        for (i, &a) in opposing.iter().enumerate() {
            let steps = &pool[a].steps;
            for (k, &(w, tw)) in steps.iter().enumerate() {
                let next = steps.get(k + 1).map(|s| s.1);
                let fw = self.store.get(w).run_time;
                for &v in &set.profiles {
                    let Some((lo, hi)) = cat.interval(w, v) else {
                        continue;
                    };
                    let mut u = tw + hi;
                    if let (Some(tn), Some((_, hh))) = (next, cat.halting_interval(w, v)) {
                        u = u.max(tn + hh - fw);
                    }
                    windows.entry(v).or_default().push(Window {
                        opposing: i,
                        lo: tw + lo,
                        hi: u,
                    });
                }
            }
            for &w in &set.profiles {
                let fw = self.store.get(w).run_time;
                for &w2 in set.successors_of(w) {
                    for &(v, tv) in steps {
                        let Some((lo, hi)) = cat.halting_interval(w, v) else {
                            continue;
                        };
                        halts.entry((w, w2)).or_default().push(HaltWindow {
                            opposing: i,
                            depart_by: tv - lo,
                            leave_from: tv - hi + fw,
                        });
                    }
                }
            }
        }

        let others = |members: &[usize]| -> Vec<usize> {
            members
                .iter()
                .filter(|&&a| pool[a].service != r)
                .map(|a| position[a])
                .collect()
        };
        let mut cliques = Vec::new();
        let mut own_cliques = Vec::new();
        for (members, beta) in req.cliques.iter().filter(|(_, b)| *b > 0.0) {
            match own_member(members).filter(|_| !self.service_edges) {
                Some(a) => own_cliques.push(OwnClique {
                    others: others(members),
                    steps: pool[a].steps.clone(),
                    beta: *beta,
                }),
                None => cliques.push((others(members), *beta)),
            }
        }

        Conditions {
            opposing,
            forbidden,
            windows,
            halts,
            cliques,
            own_cliques,
        }
    }

    fn delay_of(&self, r: usize, exit: Time) -> f64 {
        let d = exit - self.services[r].scheduled_exit;
        if self.unclipped {
            d as f64
        } else {
            d.max(0) as f64
        }
    }

    /// Solves the pricing problem with the configured engine and verifies
    /// the returned path against the opposing paths.
    pub fn price(
        &self,
        req: &PricingRequest,
        pool: &[TrainPath],
    ) -> Result<PricingOutcome, PricingError> {
        let r = req.service;
        let service = &self.services[r];
        let cond = self.conditions(req, pool);
        let clock = std::time::Instant::now();
        let raw = match self.engine {
            PricingEngine::Search => self.solve_search(req, &cond),
            PricingEngine::Mip => self.solve_mip(req, &cond)?,
        };
        log::trace!(
            "pricing service {r} ({:?}): {} opposing, {} nodes, {:?}",
            self.engine,
            cond.opposing.len(),
            raw.nodes,
            clock.elapsed()
        );
        let bound = raw.bound - req.alpha;
        let Some(path) = raw.path else {
            if raw.status == MipStatus::Infeasible {
                return Err(PricingError::Infeasible(service.id.clone()));
            }
            return Ok(PricingOutcome {
                path: None,
                cost: f64::INFINITY,
                reduced_cost: f64::INFINITY,
                bound,
                conflicts: Vec::new(),
                unflagged: 0,
                status: raw.status,
                nodes: raw.nodes,
            });
        };
        let cost = path.delay(self.store, service, self.unclipped) as f64;
        let mut conflicts = Vec::new();
        let mut unflagged = 0;
        for (i, &a) in cond.opposing.iter().enumerate() {
            if self.catalog.paths_conflict(&path, &pool[a]) {
                conflicts.push(a);
                if !raw.flagged[i] {
                    unflagged += 1;
                }
            }
        }
        if let Some(&a) = conflicts.iter().find(|a| req.forbidden.contains(a)) {
            return Err(PricingError::StartFailure {
                service: service.id.clone(),
                path: a,
            });
        }
        let covered = |m: &[usize]| {
            m.iter()
                .all(|&i| conflicts.binary_search(&cond.opposing[i]).is_ok())
        };
        let penalty: f64 = cond
            .cliques
            .iter()
            .filter(|(m, _)| covered(m))
            .map(|(_, b)| *b)
            .sum::<f64>()
            + cond
                .own_cliques
                .iter()
                .filter(|c| c.steps == path.steps && covered(&c.others))
                .map(|c| c.beta)
                .sum::<f64>();
        if unflagged > 0 {
            log::warn!(
                "service `{}`: {unflagged} conflicts missed by the pricing model",
                service.id
            );
        }
        Ok(PricingOutcome {
            path: Some(path),
            cost,
            reduced_cost: cost + penalty - req.alpha,
            bound,
            conflicts,
            unflagged,
            status: raw.status,
            nodes: raw.nodes,
        })
    }

    fn solve_mip(&self, req: &PricingRequest, cond: &Conditions) -> Result<RawSolution, LpError> {
        let r = req.service;
        let model = self.build(req.service, cond)?;
        let opts = MipOptions {
            gap_target: req.gap_target,
            time_limit: req.time_limit,
            ..Default::default()
        };
        let sol = self.backend.solve_mip(&model.mip, &opts)?;
        let constant = if self.unclipped {
            -(self.services[r].scheduled_exit as f64)
        } else {
            0.0
        };
        let bound = sol.best_bound.min(sol.objective) + constant;
        let (path, flagged) = match sol.x.as_ref() {
            Some(x) => (
                Some(self.extract(r, &model, x)),
                model.z_path.iter().map(|&(_, z)| x[z.0] > 0.5).collect(),
            ),
            None => (None, Vec::new()),
        };
        Ok(RawSolution {
            path,
            flagged,
            bound,
            status: sol.status,
            nodes: sol.nodes,
        })
    }

    fn solve_search(&self, req: &PricingRequest, cond: &Conditions) -> RawSolution {
        let r = req.service;
        let set = &self.sets[r];
        let tw = self.windows(r);
        let mut barriers: HashMap<ProfileId, Vec<Time>> = HashMap::new();
        for (&v, ws) in &cond.windows {
            barriers
                .entry(v)
                .or_default()
                .extend(ws.iter().map(|w| w.hi + 1));
        }
        for (&(w, _), hs) in &cond.halts {
            barriers
                .entry(w)
                .or_default()
                .extend(hs.iter().map(|h| h.depart_by + 1));
        }
        for b in barriers.values_mut() {
            b.sort_unstable();
            b.dedup();
        }
        let words = cond.opposing.len().div_ceil(64).max(1);
        let mut forbidden_mask = vec![0u64; words];
        for (i, &f) in cond.forbidden.iter().enumerate() {
            if f {
                forbidden_mask[i / 64] |= 1 << (i % 64);
            }
        }
        let mut s = Search {
            pricer: self,
            r,
            set,
            tw: &tw,
            cond,
            barriers: &barriers,
            forbidden_mask,
            best: f64::INFINITY,
            best_steps: None,
            best_conf: Vec::new(),
            memo: HashMap::new(),
            nodes: 0,
            deadline: req.time_limit.map(|d| std::time::Instant::now() + d),
            aborted: false,
            steps: Vec::new(),
        };
        let empty = vec![0u64; words];
        for &v in &set.start {
            let lb = tw.lb[&v];
            for t in s.candidates(v, lb) {
                if s.aborted || self.delay_of(r, t + tw.rem[&v]) >= s.best - 1e-9 {
                    break;
                }
                let mut conf = empty.clone();
                s.add_windows(v, t, &mut conf);
                if s.blocked(&conf) {
                    continue;
                }
                s.steps.push((v, t));
                s.dfs(v, t, conf);
                s.steps.pop();
            }
        }
        let weak = set
            .start
            .iter()
            .map(|v| self.delay_of(r, tw.lb[v] + tw.rem[v]))
            .fold(f64::INFINITY, f64::min);
        let (status, bound) = match (&s.best_steps, s.aborted) {
            (Some(_), false) => (MipStatus::Optimal, s.best),
            (None, false) => (MipStatus::Infeasible, f64::INFINITY),
            (_, true) => (MipStatus::TimeLimit, weak.min(s.best)),
        };
        let flagged = (0..cond.opposing.len())
            .map(|i| {
                s.best_conf
                    .get(i / 64)
                    .is_some_and(|w| w >> (i % 64) & 1 == 1)
            })
            .collect();
        RawSolution {
            path: s.best_steps.map(|steps| TrainPath::new(r, steps)),
            flagged,
            bound,
            status,
            nodes: s.nodes,
        }
    }

    fn extract(&self, r: usize, model: &PricingModel, x: &[f64]) -> TrainPath {
        let set = &self.sets[r];
        let on = |c: ColId| x[c.0] > 0.5;
        let mut v = *set
            .start
            .iter()
            .find(|v| on(model.y[v]))
            .expect("flow row selects a start profile");
        let earliest = self.services[r].earliest_departure();
        let mut time = (x[model.t[&v].0].round() as Time).max(earliest);
        let mut steps = vec![(v, time)];
        loop {
            let next = set
                .successors_of(v)
                .iter()
                .copied()
                .find(|&w| on(model.arcs[&(v, w)]));
            let Some(w) = next else { break };
            let ready = time + self.store.get(v).run_time;
            time = (x[model.t[&w].0].round() as Time).max(ready);
            steps.push((w, time));
            v = w;
        }
        TrainPath::new(r, steps)
    }
}

struct RawSolution {
    path: Option<TrainPath>,
    /// Per opposing path: conflict as seen by the solver.
    flagged: Vec<bool>,
    /// Lower bound on cost plus penalties.
    bound: f64,
    status: MipStatus,
    nodes: usize,
}

/// Depth-first search over profile chains and candidate departure times.
///
/// Moving a departure earlier never adds a conflict unless it enters a
/// conflict window from above, so some optimal path departs every profile
/// either as early as possible or right after the end of a window.
struct Search<'s, 'a> {
    pricer: &'s Pricer<'a>,
    r: usize,
    set: &'s ProfileSet,
    tw: &'s TimeWindows,
    cond: &'s Conditions,
    barriers: &'s HashMap<ProfileId, Vec<Time>>,
    forbidden_mask: Vec<u64>,
    best: f64,
    best_steps: Option<Vec<(ProfileId, Time)>>,
    best_conf: Vec<u64>,
    memo: HashMap<(ProfileId, Time), Vec<Vec<u64>>>,
    nodes: usize,
    deadline: Option<std::time::Instant>,
    aborted: bool,
    steps: Vec<(ProfileId, Time)>,
}

impl Search<'_, '_> {
    fn candidates(&self, v: ProfileId, from: Time) -> Vec<Time> {
        let from = from.max(self.tw.lb[&v]);
        let ub = self.tw.ub[&v];
        let mut out = vec![from];
        if let Some(b) = self.barriers.get(&v) {
            let k = b.partition_point(|&x| x <= from);
            out.extend(b[k..].iter().copied().take_while(|&x| x <= ub));
        }
        out.retain(|&t| t <= ub);
        out
    }

    fn add_windows(&self, v: ProfileId, t: Time, conf: &mut [u64]) {
        if let Some(ws) = self.cond.windows.get(&v) {
            for w in ws {
                if w.lo <= t && t <= w.hi {
                    conf[w.opposing / 64] |= 1 << (w.opposing % 64);
                }
            }
        }
    }

    fn blocked(&self, conf: &[u64]) -> bool {
        conf.iter()
            .zip(&self.forbidden_mask)
            .any(|(a, b)| a & b != 0)
    }

    fn penalty(&self, conf: &[u64]) -> f64 {
        self.cond
            .cliques
            .iter()
            .filter(|(m, _)| m.iter().all(|&i| conf[i / 64] >> (i % 64) & 1 == 1))
            .map(|(_, b)| *b)
            .sum()
    }

    fn dfs(&mut self, v: ProfileId, t: Time, conf: Vec<u64>) {
        self.nodes += 1;
        if self.nodes % 1024 == 0
            && self
                .deadline
                .is_some_and(|d| std::time::Instant::now() >= d)
        {
            self.aborted = true;
        }
        if self.aborted {
            return;
        }
        let pen = self.penalty(&conf);
        if pen + self.pricer.delay_of(self.r, t + self.tw.rem[&v]) >= self.best - 1e-9 {
            return;
        }
        // Prefixes of paths with own cliques carry extra penalties, so they
        // neither dominate nor get dominated.
        let on_own = self
            .cond
            .own_cliques
            .iter()
            .any(|c| c.steps.starts_with(&self.steps));
        if !on_own {
            let seen = self.memo.entry((v, t)).or_default();
            if seen
                .iter()
                .any(|s| s.iter().zip(&conf).all(|(a, b)| a & !b == 0))
            {
                return;
            }
            seen.push(conf.clone());
        }
        let f = self.pricer.store.get(v).run_time;
        if self.set.is_end(v) {
            let extra: f64 = self
                .cond
                .own_cliques
                .iter()
                .filter(|c| {
                    c.steps == self.steps
                        && c.others.iter().all(|&i| conf[i / 64] >> (i % 64) & 1 == 1)
                })
                .map(|c| c.beta)
                .sum();
            let obj = pen + extra + self.pricer.delay_of(self.r, t + f);
            if obj < self.best - 1e-9 {
                self.best = obj;
                self.best_steps = Some(self.steps.clone());
                self.best_conf = conf.clone();
            }
        }
        for &w in self.set.successors_of(v) {
            let halts = self.cond.halts.get(&(v, w));
            for tw in self.candidates(w, t + f) {
                if pen + self.pricer.delay_of(self.r, tw + self.tw.rem[&w]) >= self.best - 1e-9 {
                    break;
                }
                let mut next = conf.clone();
                self.add_windows(w, tw, &mut next);
                for h in halts.into_iter().flatten() {
                    if t <= h.depart_by && tw >= h.leave_from {
                        next[h.opposing / 64] |= 1 << (h.opposing % 64);
                    }
                }
                if self.blocked(&next) {
                    continue;
                }
                self.steps.push((w, tw));
                self.dfs(w, tw, next);
                self.steps.pop();
                if self.aborted {
                    return;
                }
            }
        }
    }
}

fn link(
    mip: &mut MipModel,
    za: ColId,
    sel: ColId,
    zl: Side,
    zu: Side,
) -> Result<Option<RowId>, LpError> {
    let row = match (zl, zu) {
        (Side::Never, _) | (_, Side::Never) => return Ok(None),
        (Side::Always, Side::Always) => mip.add_row(Sense::Ge, 0.0, &[(za, 1.0), (sel, -1.0)])?,
        (Side::Var(z), Side::Always) | (Side::Always, Side::Var(z)) => {
            mip.add_row(Sense::Ge, 0.0, &[(za, 1.0), (z, -1.0)])?
        }
        (Side::Var(a), Side::Var(b)) => {
            mip.add_row(Sense::Ge, -1.0, &[(za, 1.0), (a, -1.0), (b, -1.0)])?
        }
    };
    Ok(Some(row))
}
