//! Column generation loop: first-come-first-served start, alternating
//! master solves and pricing, then the integer master over the generated
//! columns.

use std::io::Write;
use std::time::{Duration, Instant};

use railcg_lp::{Backend, BundledSolver, LpError, MipStatus};
use serde::Serialize;
use thiserror::Error;

use crate::cliques::{CliqueStore, CliqueUpdate, ConflictGraph};
use crate::conflicts::ConflictCatalog;
use crate::master::{MasterError, MasterProblem};
use crate::model::{Instance, Time, TrainService};
use crate::path::TrainPath;
use crate::pricing::{Pricer, PricingEngine, PricingError, PricingOutcome, PricingRequest};
use crate::profiles::{ProfileCatalog, ProfileConfig, ProfileError};

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error(transparent)]
    Profiles(#[from] ProfileError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Master(#[from] MasterError),
    #[error(transparent)]
    Solver(#[from] LpError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct CgConfig {
    /// Stop once the relative gap falls to this value.
    pub gap_target: f64,
    pub time_limit: Option<Duration>,
    pub max_iterations: usize,
    /// Pricing threads; 1 prices services one after another.
    pub threads: usize,
    /// Full clique enumeration every this many iterations; 0 disables.
    pub reconcile_every: usize,
    /// Seconds after the latest entry by which every train must have left.
    pub horizon: Time,
    pub unclipped: bool,
    /// Record wall-clock times; disabled runs report zeros.
    pub timing: bool,
    pub tailing_window: usize,
    pub tailing_tolerance: f64,
    pub engine: PricingEngine,
    /// Join paths of the same service in the conflict graph; otherwise
    /// edges only join paths of different services.
    pub service_edges: bool,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            gap_target: 0.0,
            time_limit: None,
            max_iterations: 1000,
            threads: 1,
            reconcile_every: 10,
            horizon: 3600,
            unclipped: false,
            timing: true,
            tailing_window: 5,
            tailing_tolerance: 1e-3,
            engine: PricingEngine::default(),
            service_edges: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    GapReached,
    TailingOff,
    TimeLimit,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub z_rrmp: f64,
    pub lb: f64,
    pub gap: f64,
    pub n_columns: usize,
    pub n_cliques: usize,
    pub t_master_ms: u64,
    pub t_pricing_ms: u64,
    pub t_clique_ms: u64,
    pub t_total_ms: u64,
}

pub const TRACE_HEADER: &str =
    "iteration,z_rRMP,lb,gap,n_columns,n_cliques,t_master_ms,t_pricing_ms,t_clique_ms,t_total_ms";

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(TRACE_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Profiles and conflicts of an instance; independent of disturbances.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub profiles: ProfileCatalog,
    pub catalog: ConflictCatalog,
    pub config: ProfileConfig,
}

impl Prepared {
    pub fn new(instance: &Instance, config: &ProfileConfig) -> Result<Self, DispatchError> {
        let profiles = ProfileCatalog::generate(&instance.network, &instance.services, config)?;
        Ok(Self::from_profiles(instance, profiles, config))
    }

    pub fn from_profiles(
        instance: &Instance,
        profiles: ProfileCatalog,
        config: &ProfileConfig,
    ) -> Self {
        let catalog = ConflictCatalog::build(&instance.network, &profiles.store, &profiles.sets);
        Self {
            profiles,
            catalog,
            config: config.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dispatch {
    /// One path per service.
    pub paths: Vec<TrainPath>,
    pub objective: f64,
    pub fcfs_paths: Vec<TrainPath>,
    pub fcfs_objective: f64,
    /// Best proven lower bound.
    pub lower_bound: f64,
    pub final_gap: f64,
    /// Integer selections found along the way, in order.
    pub intermediate: Vec<Vec<TrainPath>>,
    pub iterations: usize,
    pub n_columns: usize,
    pub n_cliques: usize,
    pub stop: StopReason,
    pub integer_status: MipStatus,
    /// The last relaxation was already integral.
    pub integer_relaxation: bool,
    pub trace: Vec<TraceRow>,
    /// Conflicts found by verification that the pricing model missed.
    pub unflagged_conflicts: usize,
    /// Per iteration: restricted LP value and global bound.
    pub bounds: Vec<(f64, f64)>,
    pub elapsed: Duration,
}

impl Dispatch {
    /// `d_start / d_end`, infinite when only the start has delay.
    pub fn delay_quotient(&self) -> f64 {
        delay_quotient(self.fcfs_objective, self.objective)
    }

    /// True when the final selection equals the best possible one within
    /// tolerance.
    pub fn proven_optimal(&self) -> bool {
        self.final_gap <= 1e-6
    }
}

pub fn delay_quotient(start: f64, end: f64) -> f64 {
    if end > 0.0 {
        start / end
    } else if start > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

pub fn relative_gap(value: f64, bound: f64) -> f64 {
    ((value - bound) / value.abs().max(1.0)).max(0.0)
}

/// Column generation state for one disturbed instance.
pub struct ColumnGeneration<'a> {
    services: &'a [TrainService],
    prepared: &'a Prepared,
    config: CgConfig,
    backend: &'a dyn Backend,
    master: MasterProblem,
    graph: ConflictGraph,
    cliques: CliqueStore,
    t_max: Time,
    unflagged: usize,
}

static BUNDLED: BundledSolver = BundledSolver {
    tolerances: railcg_lp::Tolerances {
        feasibility: 1e-7,
        duality: 1e-6,
        integrality: 1e-6,
        optimality: 1e-9,
        pivot: 1e-9,
    },
};

impl<'a> ColumnGeneration<'a> {
    pub fn new(services: &'a [TrainService], prepared: &'a Prepared, config: CgConfig) -> Self {
        Self::with_backend(services, prepared, config, &BUNDLED)
    }

    pub fn with_backend(
        services: &'a [TrainService],
        prepared: &'a Prepared,
        config: CgConfig,
        backend: &'a dyn Backend,
    ) -> Self {
        let t_max = services
            .iter()
            .map(|s| s.earliest_departure())
            .max()
            .unwrap_or(0)
            + config.horizon;
        Self {
            services,
            prepared,
            config,
            backend,
            master: MasterProblem::new(services.len()),
            graph: ConflictGraph::new(),
            cliques: CliqueStore::new(),
            t_max,
            unflagged: 0,
        }
    }

    pub fn pricer(&self) -> Pricer<'_> {
        Pricer {
            services: self.services,
            sets: &self.prepared.profiles.sets,
            store: &self.prepared.profiles.store,
            catalog: &self.prepared.catalog,
            t_max: self.t_max,
            unclipped: self.config.unclipped,
            backend: self.backend,
            engine: self.config.engine,
            service_edges: self.config.service_edges,
        }
    }

    pub fn master(&self) -> &MasterProblem {
        &self.master
    }

    pub fn graph(&self) -> &ConflictGraph {
        &self.graph
    }

    pub fn cliques(&self) -> &CliqueStore {
        &self.cliques
    }

    /// Adds a path to the pool, the conflict graph, the clique store and
    /// the master. Returns its index, or the existing one for duplicates.
    pub fn insert_path(&mut self, path: TrainPath) -> Result<usize, DispatchError> {
        if let Some(a) = self.master.contains(&path) {
            return Ok(a);
        }
        let catalog = &self.prepared.catalog;
        let neighbors: Vec<usize> = self
            .master
            .paths()
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                (self.config.service_edges && p.service == path.service)
                    || catalog.paths_conflict(p, &path)
            })
            .map(|(i, _)| i)
            .collect();
        let node = self.graph.add_node(&neighbors);
        let update = self.cliques.update_with_node(&self.graph, node);
        self.master.sync_cliques(&self.cliques, &update)?;
        let rows: Vec<usize> = update
            .created
            .iter()
            .chain(&update.extended)
            .copied()
            .collect();
        let cost = path.delay(
            &self.prepared.profiles.store,
            &self.services[path.service],
            self.config.unclipped,
        ) as f64;
        let col = self.master.add_path_column(path, cost, &rows)?;
        debug_assert_eq!(col, node);
        Ok(col)
    }

    fn integral_selection(&self, x: &[f64]) -> Option<Vec<TrainPath>> {
        if x.iter().any(|v| (v - v.round()).abs() > 1e-6) {
            return None;
        }
        let mut out: Vec<Option<TrainPath>> = vec![None; self.services.len()];
        for (a, v) in x.iter().enumerate() {
            if *v > 0.5 {
                let p = &self.master.paths()[a];
                out[p.service] = Some(p.clone());
            }
        }
        out.into_iter().collect()
    }

    fn reconcile(&mut self) -> Result<CliqueUpdate, DispatchError> {
        let update = self.cliques.reconcile(&self.graph);
        self.master.sync_cliques(&self.cliques, &update)?;
        Ok(update)
    }

    /// First-come-first-served: services in order of earliest departure,
    /// each routed around the ones already fixed.
    pub fn fcfs(&mut self) -> Result<Vec<usize>, DispatchError> {
        let mut order: Vec<usize> = (0..self.services.len()).collect();
        order.sort_by_key(|&r| (self.services[r].earliest_departure(), r));
        let mut fixed: Vec<usize> = Vec::new();
        let mut chosen = vec![usize::MAX; self.services.len()];
        for r in order {
            let req = PricingRequest {
                service: r,
                forbidden: fixed.clone(),
                ..Default::default()
            };
            let out = self.pricer().price(&req, self.master.paths())?;
            self.unflagged += out.unflagged;
            let path = out
                .path
                .ok_or_else(|| PricingError::Infeasible(self.services[r].id.clone()))?;
            let a = self.insert_path(path)?;
            fixed.push(a);
            chosen[r] = a;
        }
        Ok(chosen)
    }

    /// Active cliques with a positive penalty.
    fn priced_cliques(&self, beta: &[f64]) -> Vec<(&[usize], f64)> {
        self.cliques
            .iter()
            .filter(|(c, k)| k.active && beta.get(*c).is_some_and(|b| *b > 1e-9))
            .map(|(c, k)| (k.members.as_slice(), beta[c]))
            .collect()
    }

    fn price_all(
        &self,
        alpha: &[f64],
        cliques: &[(&[usize], f64)],
        time_limit: Option<Duration>,
    ) -> Result<Vec<PricingOutcome>, PricingError> {
        let pricer = self.pricer();
        let pool = self.master.paths();
        let one = |r: usize| {
            let req = PricingRequest {
                service: r,
                alpha: alpha[r],
                cliques: cliques.to_vec(),
                time_limit,
                ..Default::default()
            };
            pricer.price(&req, pool)
        };
        let n = self.services.len();
        let threads = self.config.threads.clamp(1, n.max(1));
        if threads == 1 {
            return (0..n).map(one).collect();
        }
        let mut results: Vec<Option<Result<PricingOutcome, PricingError>>> =
            (0..n).map(|_| None).collect();
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|k| {
                    let one = &one;
                    s.spawn(move || {
                        (k..n)
                            .step_by(threads)
                            .map(|r| (r, one(r)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (r, out) in h.join().expect("pricing thread panicked") {
                    results[r] = Some(out);
                }
            }
        });
        results
            .into_iter()
            .map(|o| o.expect("every service priced"))
            .collect()
    }

    /// Runs the whole procedure.
    pub fn run(mut self) -> Result<Dispatch, DispatchError> {
        let started = Instant::now();
        let cfg = self.config.clone();
        let deadline = cfg.time_limit.map(|d| started + d);
        let remaining = || deadline.map(|d| d.saturating_duration_since(Instant::now()));
        let ms = |d: Duration| if cfg.timing { d.as_millis() as u64 } else { 0 };

        let fcfs = self.fcfs()?;
        let fcfs_paths: Vec<TrainPath> = fcfs
            .iter()
            .map(|&a| self.master.paths()[a].clone())
            .collect();
        let fcfs_objective: f64 = fcfs.iter().map(|&a| self.master.cost(a)).sum();
        let mut intermediate = vec![fcfs_paths.clone()];

        let mut trace = Vec::new();
        let mut bounds = Vec::new();
        let mut history: Vec<f64> = Vec::new();
        let mut lb = if cfg.unclipped {
            f64::NEG_INFINITY
        } else {
            0.0
        };
        let mut iterations = 0;
        let mut integral = false;
        let stop = loop {
            if iterations >= cfg.max_iterations {
                break StopReason::IterationLimit;
            }
            if remaining().is_some_and(|d| d.is_zero()) {
                break StopReason::TimeLimit;
            }
            iterations += 1;
            let it_start = Instant::now();
            let duals = self.master.solve_lp(self.backend)?;
            let t_master = it_start.elapsed();

            let p_start = Instant::now();
            let budget = remaining().map(|d| d / 2);
            let cliques = self.priced_cliques(&duals.beta);
            let outcomes = self.price_all(&duals.alpha, &cliques, budget)?;
            let t_pricing = p_start.elapsed();
            let lagrange: f64 = outcomes.iter().map(|o| o.bound.min(0.0)).sum();

            lb = lb.max(duals.objective + lagrange).min(duals.objective);
            bounds.push((duals.objective, lb));
            integral = match self.integral_selection(&duals.x) {
                Some(sel) => {
                    intermediate.push(sel);
                    true
                }
                None => false,
            };

            let c_start = Instant::now();
            let mut added = 0;
            for out in outcomes {
                self.unflagged += out.unflagged;
                if remaining().is_some_and(|d| d.is_zero()) {
                    continue;
                }
                if out.reduced_cost < -1e-6 {
                    if let Some(path) = out.path {
                        if self.master.contains(&path).is_none() {
                            self.insert_path(path)?;
                            added += 1;
                        }
                    }
                }
            }
            if cfg.reconcile_every > 0 && iterations % cfg.reconcile_every == 0 {
                self.reconcile()?;
            }
            let t_clique = c_start.elapsed();
            let gap = relative_gap(duals.objective, lb);
            trace.push(TraceRow {
                iteration: iterations,
                z_rrmp: duals.objective,
                lb,
                gap,
                n_columns: self.master.num_columns(),
                n_cliques: self.cliques.num_active(),
                t_master_ms: ms(t_master),
                t_pricing_ms: ms(t_pricing),
                t_clique_ms: ms(t_clique),
                t_total_ms: ms(it_start.elapsed()),
            });
            log::debug!(
                "iteration {iterations}: z={:.3} lb={lb:.3} columns={} cliques={} added={added}",
                duals.objective,
                self.master.num_columns(),
                self.cliques.num_active()
            );
            if added == 0 {
                lb = duals.objective;
                break StopReason::Converged;
            }
            if duals.objective - lb <= 1e-9 * duals.objective.abs().max(1.0) {
                break StopReason::Converged;
            }
            if cfg.gap_target > 0.0 {
                if gap <= cfg.gap_target {
                    break StopReason::GapReached;
                }
                history.push(duals.objective);
                let w = cfg.tailing_window;
                if w > 0 && history.len() > w {
                    let old = history[history.len() - 1 - w];
                    let new = *history.last().expect("nonempty");
                    if (old - new) <= cfg.tailing_tolerance * old.abs().max(1.0) {
                        break StopReason::TailingOff;
                    }
                }
            }
        };

        let selection = self.master.solve_integer(
            Some(&fcfs),
            cfg.gap_target,
            remaining().map(|d| d.max(Duration::from_secs(1))),
        )?;
        let (objective, chosen) = if selection.objective < fcfs_objective {
            (selection.objective, selection.chosen)
        } else {
            (fcfs_objective, fcfs)
        };
        let paths: Vec<TrainPath> = chosen
            .iter()
            .map(|&a| self.master.paths()[a].clone())
            .collect();
        intermediate.push(paths.clone());
        let lower_bound = lb.min(objective);
        Ok(Dispatch {
            intermediate,
            final_gap: relative_gap(objective, lower_bound),
            paths,
            objective,
            fcfs_paths,
            fcfs_objective,
            lower_bound,
            iterations,
            n_columns: self.master.num_columns(),
            n_cliques: self.cliques.num_active(),
            stop,
            integer_status: selection.status,
            integer_relaxation: integral,
            trace,
            unflagged_conflicts: self.unflagged,
            bounds,
            elapsed: started.elapsed(),
        })
    }
}

/// Profiles, conflicts and column generation for one instance.
pub fn dispatch(
    instance: &Instance,
    profile_config: &ProfileConfig,
    config: CgConfig,
) -> Result<Dispatch, DispatchError> {
    let prepared = Prepared::new(instance, profile_config)?;
    ColumnGeneration::new(&instance.services, &prepared, config).run()
}
