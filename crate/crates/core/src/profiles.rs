//! Speed-profiles: timed block sequences between two dispatching points.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{k_shortest_routes, ModelError, Network, Time, TrainService};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("invalid kinematics: max speed, acceleration and deceleration must be positive")]
    InvalidKinematics,
    #[error("service `{service}`: no speed-profile chain from entry to exit ({reason})")]
    NoProfile { service: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("profile cache: {0}")]
    Cache(String),
}

/// Blocking-time margins in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockingMargins {
    pub setup: Time,
    pub release: Time,
    pub clear: Time,
}

impl Default for BlockingMargins {
    fn default() -> Self {
        Self {
            setup: 15,
            release: 15,
            clear: 10,
        }
    }
}

impl BlockingMargins {
    pub const ZERO: Self = Self {
        setup: 0,
        release: 0,
        clear: 0,
    };
}

/// Output of [`trapezoidal_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunProfile {
    /// Arrival plus dwell, whole seconds.
    pub run_time: Time,
    pub arrival: Time,
    pub peak_speed: f64,
    /// One window per traversed block, relative to departure.
    pub windows: Vec<(Time, Time)>,
}

/// Standstill-to-standstill run over consecutive blocks of the given lengths.
///
/// The last block is where the train stops; its window ends `release`
/// seconds after arrival. Other blocks are held from `setup` seconds before
/// the front enters until `clear + release` seconds after it leaves.
pub fn trapezoidal_run(
    lengths: &[f64],
    v_max: f64,
    accel: f64,
    decel: f64,
    dwell: Time,
    margins: &BlockingMargins,
) -> Result<RunProfile, ProfileError> {
    if !(v_max > 0.0 && accel > 0.0 && decel > 0.0) {
        return Err(ProfileError::InvalidKinematics);
    }
    let total: f64 = lengths.iter().sum();
    if total <= 0.0 {
        return Ok(RunProfile {
            run_time: dwell,
            arrival: 0,
            peak_speed: 0.0,
            windows: Vec::new(),
        });
    }
    let full = v_max * v_max / (2.0 * accel) + v_max * v_max / (2.0 * decel);
    let peak = if full <= total {
        v_max
    } else {
        (2.0 * total * accel * decel / (accel + decel)).sqrt()
    };
    let x_acc = peak * peak / (2.0 * accel);
    let x_dec = peak * peak / (2.0 * decel);
    let cruise = (total - x_acc - x_dec).max(0.0);
    let t_acc = peak / accel;
    let t_end = t_acc + cruise / peak + peak / decel;
    let time_at = |x: f64| -> f64 {
        if x <= x_acc {
            (2.0 * x / accel).sqrt()
        } else if x <= x_acc + cruise {
            t_acc + (x - x_acc) / peak
        } else {
            t_end - (2.0 * (total - x).max(0.0) / decel).sqrt()
        }
    };
    let arrival = (t_end - 1e-9).ceil() as Time;
    let mut windows = Vec::with_capacity(lengths.len());
    let mut x = 0.0;
    for (i, &len) in lengths.iter().enumerate() {
        let entry = time_at(x);
        x += len;
        let start = ((entry - margins.setup as f64 + 1e-9).floor() as Time).max(0);
        let end = if i + 1 == lengths.len() {
            arrival + margins.release
        } else {
            let exit = time_at(x);
            (exit + (margins.clear + margins.release) as f64 - 1e-9).ceil() as Time
        };
        windows.push((start, end.max(start + 1)));
    }
    Ok(RunProfile {
        run_time: arrival + dwell,
        arrival,
        peak_speed: peak,
        windows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProfileId(pub u32);

impl ProfileId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Position of a profile within a service's macroscopic itinerary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Stage {
    /// Leg between scheduled stops `leg` and `leg + 1`.
    pub leg: usize,
    /// Inserted halt point, if the leg is split.
    pub via: Option<usize>,
    /// 0 before the inserted halt, 1 after it; always 0 for direct legs.
    pub part: u8,
}

impl Stage {
    fn closes_leg(&self) -> bool {
        self.via.is_none() || self.part == 1
    }

    fn opens_leg(&self) -> bool {
        self.part == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub id: ProfileId,
    pub service: usize,
    /// Blocks from the origin point's block to the destination point's block.
    pub route: Vec<usize>,
    pub from_point: usize,
    pub to_point: usize,
    pub v_max_used: f64,
    /// Run time f_v including the dwell at `to_point`.
    pub run_time: Time,
    pub dwell: Time,
    /// Occupation window per route block, relative to departure.
    pub occupations: Vec<(Time, Time)>,
    pub stage: Stage,
}

impl SpeedProfile {
    pub fn last_block(&self) -> usize {
        *self.route.last().expect("routes are nonempty")
    }
}

/// Arena of all profiles of an instance; ids index into it.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProfileStore {
    profiles: Vec<SpeedProfile>,
}

impl ProfileStore {
    pub fn get(&self, id: ProfileId) -> &SpeedProfile {
        &self.profiles[id.index()]
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SpeedProfile> {
        self.profiles.iter()
    }

    fn push(&mut self, mut p: SpeedProfile) -> ProfileId {
        let id = ProfileId(self.profiles.len() as u32);
        p.id = id;
        self.profiles.push(p);
        id
    }
}

/// Profiles of one service and how they chain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub service: usize,
    pub profiles: Vec<ProfileId>,
    pub start: Vec<ProfileId>,
    pub end: Vec<ProfileId>,
    pub successors: BTreeMap<ProfileId, Vec<ProfileId>>,
}

impl ProfileSet {
    pub fn successors_of(&self, v: ProfileId) -> &[ProfileId] {
        self.successors.get(&v).map_or(&[], |s| s.as_slice())
    }

    pub fn predecessors(&self) -> BTreeMap<ProfileId, Vec<ProfileId>> {
        let mut pred: BTreeMap<ProfileId, Vec<ProfileId>> = BTreeMap::new();
        for (&v, succ) in &self.successors {
            for &w in succ {
                pred.entry(w).or_default().push(v);
            }
        }
        pred
    }

    pub fn is_start(&self, v: ProfileId) -> bool {
        self.start.binary_search(&v).is_ok()
    }

    pub fn is_end(&self, v: ProfileId) -> bool {
        self.end.binary_search(&v).is_ok()
    }

    /// Every start-to-end chain; exponential, meant for small sets and oracles.
    pub fn chains(&self) -> Vec<Vec<ProfileId>> {
        let mut out = Vec::new();
        let mut stack: Vec<Vec<ProfileId>> = self.start.iter().map(|&s| vec![s]).collect();
        stack.reverse();
        while let Some(chain) = stack.pop() {
            let last = *chain.last().expect("nonempty");
            if self.is_end(last) {
                out.push(chain.clone());
            }
            for &w in self.successors_of(last).iter().rev() {
                let mut c = chain.clone();
                c.push(w);
                stack.push(c);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    /// Routes per point pair; `usize::MAX` for unlimited.
    pub k: usize,
    /// Detour factor.
    pub rho: f64,
    /// Fractions of the nominal maximum speed.
    pub speed_levels: Vec<f64>,
    pub margins: BlockingMargins,
    /// Allow one additional halt per leg at a station on the way.
    pub insert_halts: bool,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            k: 3,
            rho: 2.5,
            speed_levels: vec![1.0, 0.85, 0.7],
            margins: BlockingMargins::default(),
            insert_halts: true,
        }
    }
}

struct Draft {
    profile: SpeedProfile,
}

fn make_profile(
    net: &Network,
    service_idx: usize,
    service: &TrainService,
    route: &[usize],
    from: usize,
    to: usize,
    level: f64,
    dwell: Time,
    stage: Stage,
    margins: &BlockingMargins,
) -> Result<SpeedProfile, ProfileError> {
    let moving = &route[1..];
    let lengths: Vec<f64> = moving.iter().map(|&b| net.block(b).length).collect();
    let limit = moving
        .iter()
        .map(|&b| net.block(b).speed_limit)
        .fold(service.kinematics.max_speed, f64::min);
    let v = level * limit;
    let k = service.kinematics;
    let run = trapezoidal_run(&lengths, v, k.accel, k.decel, dwell, margins)?;
    let mut occupations = Vec::with_capacity(route.len());
    occupations.push((0, margins.clear + margins.release));
    occupations.extend(run.windows.iter().copied());
    if let Some(last) = occupations.last_mut() {
        last.1 = last.1.max(run.run_time + margins.release);
    }
    Ok(SpeedProfile {
        id: ProfileId(0),
        service: service_idx,
        route: route.to_vec(),
        from_point: from,
        to_point: to,
        v_max_used: v,
        run_time: run.run_time,
        dwell,
        occupations,
        stage,
    })
}

struct Stop {
    points: Vec<usize>,
    dwell: Time,
    group: Option<String>,
}

/// Builds every speed-profile of `service` and wires the successor relation.
pub fn generate_profiles(
    service_idx: usize,
    service: &TrainService,
    net: &Network,
    cfg: &ProfileConfig,
    store: &mut ProfileStore,
) -> Result<ProfileSet, ProfileError> {
    let k = service.kinematics;
    if !(k.max_speed > 0.0 && k.accel > 0.0 && k.decel > 0.0) {
        return Err(ProfileError::InvalidKinematics);
    }
    let no_profile = |reason: String| ProfileError::NoProfile {
        service: service.id.clone(),
        reason,
    };
    let mut stops = vec![Stop {
        points: vec![net.point_id(&service.entry_point)?],
        dwell: 0,
        group: None,
    }];
    for h in &service.scheduled_halts {
        stops.push(Stop {
            points: net.group_points(&h.platform_group).to_vec(),
            dwell: h.min_dwell,
            group: Some(h.platform_group.clone()),
        });
    }
    stops.push(Stop {
        points: vec![net.point_id(&service.exit_point)?],
        dwell: 0,
        group: None,
    });
    let scheduled_groups: HashSet<&str> = stops.iter().filter_map(|s| s.group.as_deref()).collect();

    let shortest = |a: usize, b: usize| -> Option<f64> {
        k_shortest_routes(net, a, b, 1, 1.0)
            .ok()
            .map(|r| r[0].length)
    };
    let set_distance = |from: &[usize], to: &[usize]| -> Option<f64> {
        let mut best: Option<f64> = None;
        for &a in from {
            for &b in to {
                if a != b {
                    if let Some(d) = shortest(a, b) {
                        best = Some(best.map_or(d, |x: f64| x.min(d)));
                    }
                }
            }
        }
        best
    };

    let mut drafts: Vec<Draft> = Vec::new();
    let mut emit =
        |from: &[usize], to: &[usize], dwell: Time, stage: Stage| -> Result<(), ProfileError> {
            for &a in from {
                for &b in to {
                    if a == b || net.point_block(a) == net.point_block(b) {
                        continue;
                    }
                    let routes = match k_shortest_routes(net, a, b, cfg.k, cfg.rho) {
                        Ok(r) => r,
                        Err(ModelError::NoRoute { .. }) => continue,
                        Err(e) => return Err(e.into()),
                    };
                    for r in &routes {
                        for &level in &cfg.speed_levels {
                            let p = make_profile(
                                net,
                                service_idx,
                                service,
                                &r.blocks,
                                a,
                                b,
                                level,
                                dwell,
                                stage,
                                &cfg.margins,
                            )?;
                            drafts.push(Draft { profile: p });
                        }
                    }
                }
            }
            Ok(())
        };

    for leg in 0..stops.len() - 1 {
        let (s, t) = (&stops[leg], &stops[leg + 1]);
        emit(
            &s.points,
            &t.points,
            t.dwell,
            Stage {
                leg,
                via: None,
                part: 0,
            },
        )?;
        if !cfg.insert_halts {
            continue;
        }
        let Some(direct) = set_distance(&s.points, &t.points) else {
            continue;
        };
        for (group, points) in net.groups() {
            if scheduled_groups.contains(group) {
                continue;
            }
            for &x in points {
                if net.point(x).kind != crate::model::PointKind::Halt {
                    continue;
                }
                let (Some(d1), Some(d2)) =
                    (set_distance(&s.points, &[x]), set_distance(&[x], &t.points))
                else {
                    continue;
                };
                if d1 + d2 <= cfg.rho * direct + 1e-9 {
                    emit(
                        &s.points,
                        &[x],
                        0,
                        Stage {
                            leg,
                            via: Some(x),
                            part: 0,
                        },
                    )?;
                    emit(
                        &[x],
                        &t.points,
                        t.dwell,
                        Stage {
                            leg,
                            via: Some(x),
                            part: 1,
                        },
                    )?;
                }
            }
        }
    }

    let last_leg = stops.len() - 2;
    let entry = stops[0].points[0];
    let exit = stops[stops.len() - 1].points[0];
    let n = drafts.len();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let a = &drafts[i].profile;
        for j in 0..n {
            let b = &drafts[j].profile;
            if a.to_point != b.from_point {
                continue;
            }
            let next_leg =
                a.stage.closes_leg() && b.stage.opens_leg() && b.stage.leg == a.stage.leg + 1;
            let same_leg = a.stage.via.is_some()
                && a.stage.part == 0
                && b.stage.leg == a.stage.leg
                && b.stage.via == a.stage.via
                && b.stage.part == 1;
            if next_leg || same_leg {
                succ[i].push(j);
            }
        }
    }
    let is_start =
        |p: &SpeedProfile| p.stage.leg == 0 && p.stage.opens_leg() && p.from_point == entry;
    let is_end =
        |p: &SpeedProfile| p.stage.leg == last_leg && p.stage.closes_leg() && p.to_point == exit;

    let mut fwd = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&i| is_start(&drafts[i].profile)).collect();
    for &i in &stack {
        fwd[i] = true;
    }
    while let Some(i) = stack.pop() {
        for &j in &succ[i] {
            if !fwd[j] {
                fwd[j] = true;
                stack.push(j);
            }
        }
    }
    let mut bwd = vec![false; n];
    let mut changed = true;
    for i in 0..n {
        bwd[i] = is_end(&drafts[i].profile);
    }
    while changed {
        changed = false;
        for i in 0..n {
            if !bwd[i] && succ[i].iter().any(|&j| bwd[j]) {
                bwd[i] = true;
                changed = true;
            }
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&i| fwd[i] && bwd[i]).collect();
    if keep.is_empty() {
        return Err(no_profile(format!(
            "{} candidate profiles, none on a complete chain",
            n
        )));
    }

    let mut ids = vec![None; n];
    let mut set = ProfileSet {
        service: service_idx,
        ..Default::default()
    };
    for &i in &keep {
        let id = store.push(drafts[i].profile.clone());
        ids[i] = Some(id);
        set.profiles.push(id);
        if is_start(&drafts[i].profile) {
            set.start.push(id);
        }
        if is_end(&drafts[i].profile) {
            set.end.push(id);
        }
    }
    for &i in &keep {
        let s: Vec<ProfileId> = succ[i].iter().filter_map(|&j| ids[j]).collect();
        if !s.is_empty() {
            set.successors.insert(ids[i].expect("kept"), s);
        }
    }
    Ok(set)
}

/// Profiles of all services in one arena.
#[derive(Debug, Clone, Default)]
pub struct ProfileCatalog {
    pub store: ProfileStore,
    pub sets: Vec<ProfileSet>,
}

impl ProfileCatalog {
    pub fn generate(
        net: &Network,
        services: &[TrainService],
        cfg: &ProfileConfig,
    ) -> Result<Self, ProfileError> {
        let mut store = ProfileStore::default();
        let mut sets = Vec::with_capacity(services.len());
        for (i, s) in services.iter().enumerate() {
            sets.push(generate_profiles(i, s, net, cfg, &mut store)?);
        }
        Ok(Self { store, sets })
    }

    /// Loads from `path` if it holds a cache for the same inputs, otherwise
    /// generates and writes it.
    pub fn cached(
        path: &Path,
        net: &Network,
        services: &[TrainService],
        cfg: &ProfileConfig,
    ) -> Result<Self, ProfileError> {
        let key = CacheKey::new(net, services, cfg);
        if let Ok(text) = std::fs::read_to_string(path) {
            match serde_json::from_str::<CacheFile>(&text) {
                Ok(file) if file.key == key => {
                    return Ok(Self {
                        store: file.store,
                        sets: file.sets,
                    })
                }
                Ok(_) => log::info!("profile cache {} is stale", path.display()),
                Err(e) => log::warn!("ignoring unreadable profile cache: {e}"),
            }
        }
        let cat = Self::generate(net, services, cfg)?;
        let file = CacheFile {
            key,
            store: cat.store.clone(),
            sets: cat.sets.clone(),
        };
        let text = serde_json::to_string(&file).map_err(|e| ProfileError::Cache(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| ProfileError::Cache(e.to_string()))?;
        Ok(cat)
    }

    pub fn num_profiles(&self) -> usize {
        self.store.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheKey {
    network_hash: String,
    services: Vec<String>,
    k: usize,
    speed_levels: Vec<f64>,
    config: ProfileConfig,
}

impl CacheKey {
    fn new(net: &Network, services: &[TrainService], cfg: &ProfileConfig) -> Self {
        Self {
            network_hash: net.content_hash(),
            services: services
                .iter()
                .map(|s| {
                    serde_json::to_string(&(
                        &s.id,
                        &s.entry_point,
                        &s.exit_point,
                        &s.scheduled_halts,
                        &s.kinematics,
                    ))
                    .expect("serialisable")
                })
                .collect(),
            k: cfg.k,
            speed_levels: cfg.speed_levels.clone(),
            config: cfg.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    key: CacheKey,
    store: ProfileStore,
    sets: Vec<ProfileSet>,
}

/// Checks the structural invariants of a generated set; returns a description
/// of the first violation.
pub fn check_profile_set(
    set: &ProfileSet,
    store: &ProfileStore,
    margins: &BlockingMargins,
) -> Result<(), String> {
    let ids: BTreeSet<ProfileId> = set.profiles.iter().copied().collect();
    for &id in &set.profiles {
        let p = store.get(id);
        if p.route.len() != p.occupations.len() {
            return Err(format!("{id:?}: window count mismatch"));
        }
        for w in &p.occupations {
            if w.0 >= w.1 {
                return Err(format!("{id:?}: empty window {w:?}"));
            }
        }
        for pair in p.occupations.windows(2) {
            if pair[1].0 < pair[0].0 {
                return Err(format!("{id:?}: window starts decrease"));
            }
            if pair[1].0 > pair[0].1 {
                return Err(format!("{id:?}: occupation gap"));
            }
        }
        if p.occupations.last().expect("nonempty").1 > p.run_time + margins.release {
            return Err(format!(
                "{id:?}: last window ends after run time plus release"
            ));
        }
        for &w in set.successors_of(id) {
            if !ids.contains(&w) || store.get(w).from_point != p.to_point {
                return Err(format!("{id:?} -> {w:?}: successor mismatch"));
            }
        }
    }
    let chains = set.chains();
    let covered: BTreeSet<ProfileId> = chains.iter().flatten().copied().collect();
    if covered != ids {
        return Err("some profile lies on no start-to-end chain".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::synth;

    #[test]
    fn trapezoid_and_triangle() {
        let m = BlockingMargins::ZERO;
        let r = trapezoidal_run(&[1000.0], 20.0, 1.0, 1.0, 0, &m).unwrap();
        assert_eq!(r.run_time, 70);
        assert_eq!(r.windows, vec![(0, 70)]);
        let r = trapezoidal_run(&[100.0], 20.0, 1.0, 1.0, 0, &m).unwrap();
        assert_eq!(r.run_time, 20);
        assert!((r.peak_speed - 10.0).abs() < 1e-12);
        let r0 = trapezoidal_run(&[1000.0], 20.0, 1.0, 1.0, 0, &m).unwrap();
        let r30 = trapezoidal_run(&[1000.0], 20.0, 1.0, 1.0, 30, &m).unwrap();
        assert_eq!(r30.run_time, 100);
        assert_eq!(r30.windows, r0.windows);
        assert!(matches!(
            trapezoidal_run(&[10.0], 0.0, 1.0, 1.0, 0, &m),
            Err(ProfileError::InvalidKinematics)
        ));
    }

    #[test]
    fn windows_use_margins() {
        let m = BlockingMargins::default();
        let r = trapezoidal_run(&[200.0, 600.0, 200.0], 20.0, 1.0, 1.0, 0, &m).unwrap();
        // Blocks entered at 0, 20 and 50 s; left at 20, 50 and 70 s.
        assert_eq!(r.windows, vec![(0, 45), (5, 75), (35, 85)]);
    }

    #[test]
    fn single_combination() {
        let net = synth::line(3, 500.0);
        let service = TrainService {
            id: "r".into(),
            entry_point: "in".into(),
            exit_point: "out".into(),
            entry_time: 0,
            scheduled_exit: 100,
            scheduled_halts: vec![],
            kinematics: crate::model::Kinematics {
                max_speed: 20.0,
                accel: 1.0,
                decel: 1.0,
            },
            disturbance: 0,
        };
        let cfg = ProfileConfig {
            speed_levels: vec![1.0],
            ..Default::default()
        };
        let mut store = ProfileStore::default();
        let set = generate_profiles(0, &service, &net, &cfg, &mut store).unwrap();
        assert_eq!(set.profiles.len(), 1);
        assert_eq!(set.start, set.end);
    }

    #[test]
    fn slower_level_takes_longer() {
        let inst = synth::corridor_instance(
            &synth::three_station_spec(),
            &[synth::ServiceTemplate::new("a", true, 0, 60)],
        );
        let cfg = ProfileConfig {
            k: 1,
            speed_levels: vec![1.0, 0.8],
            insert_halts: false,
            ..Default::default()
        };
        let mut store = ProfileStore::default();
        let set = generate_profiles(0, &inst.services[0], &inst.network, &cfg, &mut store).unwrap();
        assert_eq!(set.profiles.len(), 2);
        let (a, b) = (store.get(set.profiles[0]), store.get(set.profiles[1]));
        assert_eq!(a.route, b.route);
        assert!(b.run_time > a.run_time);
        check_profile_set(&set, &store, &cfg.margins).unwrap();
    }
}
