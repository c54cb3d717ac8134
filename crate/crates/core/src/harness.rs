//! Disturbed scenario batches: scenario files, disturbance sampling,
//! replications and reports.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driver::{self, CgConfig, ColumnGeneration, Dispatch, Prepared, TraceRow};
use crate::model::{Instance, ModelError, Time};
use crate::profiles::ProfileConfig;

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dispatch(#[from] driver::DispatchError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Scenario file contents. Missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub format_version: u32,
    /// Instance file with network and timetable, relative to the scenario
    /// file.
    pub network: PathBuf,
    /// Number of services taken from the timetable; all when absent.
    pub n: Option<usize>,
    /// Routes per point pair; unlimited when absent.
    pub k: Option<usize>,
    pub rho: f64,
    pub speed_levels: Vec<f64>,
    pub insert_halts: bool,
    /// Probability of an undisturbed entry.
    pub q: f64,
    /// Rate of the exponential entry delay in 1/s.
    pub lambda: f64,
    pub horizon: Time,
    pub seed: u64,
    pub replications: usize,
    pub gap: f64,
    /// Seconds per replication.
    pub time_limit: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let p = ProfileConfig::default();
        Self {
            format_version: SCENARIO_VERSION,
            network: PathBuf::new(),
            n: None,
            k: Some(p.k),
            rho: p.rho,
            speed_levels: p.speed_levels,
            insert_halts: p.insert_halts,
            q: 0.8,
            lambda: 1.0 / 300.0,
            horizon: 3600,
            seed: 0,
            replications: 50,
            gap: 0.0,
            time_limit: None,
        }
    }
}

impl ScenarioConfig {
    /// Reads a scenario file; its `network` is resolved against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        if cfg.format_version != SCENARIO_VERSION {
            return Err(HarnessError::Config(format!(
                "unsupported format_version {}",
                cfg.format_version
            )));
        }
        if cfg.network.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.network = dir.join(&cfg.network);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if !(0.0..=1.0).contains(&self.q) {
            return bad("q must lie in [0, 1]");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be positive");
        }
        if self.n == Some(0) {
            return bad("n must be at least 1");
        }
        if self.k == Some(0) {
            return bad("k must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.gap) {
            return bad("gap must lie in [0, 1]");
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return bad("time limit must be positive");
        }
        if self.horizon <= 0 {
            return bad("horizon must be positive");
        }
        if self.speed_levels.is_empty() || self.speed_levels.iter().any(|&s| !(s > 0.0 && s <= 1.0))
        {
            return bad("speed levels must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn profile_config(&self) -> ProfileConfig {
        ProfileConfig {
            k: self.k.unwrap_or(usize::MAX),
            rho: self.rho,
            speed_levels: self.speed_levels.clone(),
            insert_halts: self.insert_halts,
            ..Default::default()
        }
    }

    /// Instance with the first `n` services.
    pub fn instance(&self) -> Result<Instance, HarnessError> {
        let inst = Instance::load(&self.network)?;
        Ok(match self.n {
            Some(n) => inst.with_first_services(n),
            None => inst,
        })
    }
}

/// Entry delay: zero with probability `q`, otherwise exponential with rate
/// `lambda` rounded to whole seconds.
pub fn sample_disturbance<R: Rng + ?Sized>(rng: &mut R, q: f64, lambda: f64) -> Time {
    if rng.random_bool(q) {
        return 0;
    }
    let exp = Exp::new(lambda).expect("positive rate");
    exp.sample(rng).round() as Time
}

/// Seed of replication `rep`: splitmix64 applied to
/// `master + (rep + 1) * 0x9E3779B97F4A7C15`.
pub fn sub_seed(master: u64, rep: usize) -> u64 {
    let mut z = master.wrapping_add((rep as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Copy of `instance` with a fresh disturbance per service.
pub fn disturb(instance: &Instance, seed: u64, q: f64, lambda: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = instance.clone();
    for s in &mut out.services {
        s.disturbance = sample_disturbance(&mut rng, q, lambda);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub d_start: f64,
    pub d_end: f64,
    pub delay_quotient: f64,
    pub cpu_s: f64,
    pub gap: f64,
    pub integer: bool,
    pub n_cliques: usize,
    pub n_iterations: usize,
    pub n_paths: usize,
}

pub const REPORT_HEADER: &str =
    "replication,d_start,d_end,delay_quotient,cpu_s,gap,integer,n_cliques,n_iterations,n_paths";

impl ReplicationRow {
    pub fn from_dispatch(replication: usize, d: &Dispatch, timing: bool) -> Self {
        Self {
            replication,
            d_start: d.fcfs_objective,
            d_end: d.objective,
            delay_quotient: d.delay_quotient(),
            cpu_s: if timing { d.elapsed.as_secs_f64() } else { 0.0 },
            gap: d.final_gap,
            integer: d.integer_relaxation,
            n_cliques: d.n_cliques,
            n_iterations: d.iterations,
            n_paths: d.n_columns,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub replication: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Aggregates {
    pub replications: usize,
    pub cpu_mean: f64,
    pub cpu_min: f64,
    pub cpu_max: f64,
    /// Over finite quotients.
    pub delay_quotient_mean: f64,
    pub gap_mean: f64,
    pub integer_share: f64,
    pub cliques_mean: f64,
    pub iterations_mean: f64,
    pub paths_mean: f64,
}

impl Aggregates {
    pub fn of(rows: &[ReplicationRow]) -> Self {
        if rows.is_empty() {
            return Self::default();
        }
        let n = rows.len() as f64;
        let mean = |f: &dyn Fn(&ReplicationRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let finite: Vec<f64> = rows
            .iter()
            .map(|r| r.delay_quotient)
            .filter(|q| q.is_finite())
            .collect();
        Self {
            replications: rows.len(),
            cpu_mean: mean(&|r| r.cpu_s),
            cpu_min: rows.iter().map(|r| r.cpu_s).fold(f64::INFINITY, f64::min),
            cpu_max: rows.iter().map(|r| r.cpu_s).fold(0.0, f64::max),
            delay_quotient_mean: finite.iter().sum::<f64>() / finite.len().max(1) as f64,
            gap_mean: mean(&|r| r.gap),
            integer_share: mean(&|r| if r.integer { 1.0 } else { 0.0 }),
            cliques_mean: mean(&|r| r.n_cliques as f64),
            iterations_mean: mean(&|r| r.n_iterations as f64),
            paths_mean: mean(&|r| r.n_paths as f64),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchReport {
    pub rows: Vec<ReplicationRow>,
    pub failures: Vec<Failure>,
    pub aggregates: Aggregates,
    #[serde(skip)]
    pub traces: Vec<Vec<TraceRow>>,
    #[serde(skip)]
    pub dispatches: Vec<Dispatch>,
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub threads: usize,
    /// Replications run concurrently, each pricing on one thread.
    pub parallel_reps: bool,
    pub timing: bool,
    pub service_edges: bool,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            threads: 1,
            parallel_reps: false,
            timing: true,
            service_edges: true,
        }
    }
}

impl BatchOptions {
    pub fn cg_config(&self, scenario: &ScenarioConfig, pricing_threads: usize) -> CgConfig {
        CgConfig {
            gap_target: scenario.gap,
            time_limit: scenario.time_limit.map(Duration::from_secs_f64),
            horizon: scenario.horizon,
            threads: pricing_threads,
            timing: self.timing,
            service_edges: self.service_edges,
            ..Default::default()
        }
    }
}

/// Runs every replication of `scenario` on `instance`. Profiles and
/// conflicts are prepared once; only entry times change between
/// replications.
pub fn run_batch(
    scenario: &ScenarioConfig,
    instance: &Instance,
    options: &BatchOptions,
) -> Result<BatchReport, HarnessError> {
    scenario.validate()?;
    let prepared = Prepared::new(instance, &scenario.profile_config())?;
    let one = |rep: usize, threads: usize| {
        let disturbed = disturb(
            instance,
            sub_seed(scenario.seed, rep),
            scenario.q,
            scenario.lambda,
        );
        let cfg = options.cg_config(scenario, threads);
        ColumnGeneration::new(&disturbed.services, &prepared, cfg).run()
    };
    let reps = scenario.replications;
    let results: Vec<Result<Dispatch, driver::DispatchError>> = if options.parallel_reps && reps > 1
    {
        let workers = options.threads.clamp(1, reps);
        let mut slots: Vec<Option<Result<Dispatch, driver::DispatchError>>> =
            (0..reps).map(|_| None).collect();
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let one = &one;
                    s.spawn(move || {
                        (w..reps)
                            .step_by(workers)
                            .map(|r| (r, one(r, 1)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (r, out) in h.join().expect("replication thread panicked") {
                    slots[r] = Some(out);
                }
            }
        });
        slots
            .into_iter()
            .map(|s| s.expect("every replication ran"))
            .collect()
    } else {
        (0..reps).map(|r| one(r, options.threads)).collect()
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut traces = Vec::new();
    let mut dispatches = Vec::new();
    for (rep, res) in results.into_iter().enumerate() {
        match res {
            Ok(d) => {
                rows.push(ReplicationRow::from_dispatch(rep, &d, options.timing));
                traces.push(d.trace.clone());
                dispatches.push(d);
            }
            Err(e) => {
                log::error!("replication {rep}: {e}");
                failures.push(Failure {
                    replication: rep,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(BatchReport {
        aggregates: Aggregates::of(&rows),
        rows,
        failures,
        traces,
        dispatches,
    })
}

pub fn write_csv<W: Write>(out: W, rows: &[ReplicationRow]) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(REPORT_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(mut out: W, report: &BatchReport) -> Result<(), HarnessError> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    Ok(())
}
