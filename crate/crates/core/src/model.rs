//! Infrastructure and train services.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod routes;
pub mod synth;

pub use routes::{k_shortest_routes, Route};

/// Whole seconds.
pub type Time = i64;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("network is not well-formed: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown dispatching point `{0}`")]
    UnknownPoint(String),
    #[error("no route from `{from}` to `{to}`")]
    NoRoute { from: String, to: String },
    #[error("service `{service}`: {reason}")]
    InvalidService { service: String, reason: String },
    #[error("unsupported format_version {0}")]
    FormatVersion(u32),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSection {
    pub id: String,
    /// Metres.
    pub length: f64,
    /// Metres per second.
    pub speed_limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Entry,
    Exit,
    Halt,
    Junction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchingPoint {
    pub id: String,
    pub kind: PointKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform_group: Option<String>,
    /// Block the train stands on when stopped at this point.
    pub block: String,
}

/// Network as written in instance files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub blocks: Vec<BlockSection>,
    /// Directed block successions.
    pub adjacency: Vec<(String, String)>,
    pub points: Vec<DispatchingPoint>,
    /// Unordered pairs of blocks that cannot be used at the same time.
    #[serde(default)]
    pub crossing_pairs: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoBlocks,
    NoPoints,
    DuplicateBlock(String),
    DuplicatePoint(String),
    BadBlockGeometry(String),
    DanglingEdge(String, String),
    UnknownPointBlock { point: String, block: String },
    HaltWithoutGroup(String),
    BadCrossingPair(String, String),
    UnreachableExit(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoBlocks => write!(f, "no block sections"),
            Violation::NoPoints => write!(f, "no dispatching points"),
            Violation::DuplicateBlock(b) => write!(f, "duplicate block `{b}`"),
            Violation::DuplicatePoint(p) => write!(f, "duplicate point `{p}`"),
            Violation::BadBlockGeometry(b) => {
                write!(f, "block `{b}` needs positive length and speed limit")
            }
            Violation::DanglingEdge(a, b) => write!(f, "dangling edge `{a}` -> `{b}`"),
            Violation::UnknownPointBlock { point, block } => {
                write!(f, "point `{point}` sits on unknown block `{block}`")
            }
            Violation::HaltWithoutGroup(p) => write!(f, "halt point `{p}` has no platform group"),
            Violation::BadCrossingPair(a, b) => write!(f, "invalid crossing pair `{a}`/`{b}`"),
            Violation::UnreachableExit(p) => {
                write!(f, "exit point `{p}` is unreachable from every entry")
            }
        }
    }
}

/// Lists everything wrong with `spec`; empty iff the network is usable.
pub fn validate_network(spec: &NetworkSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    if spec.blocks.is_empty() {
        out.push(Violation::NoBlocks);
    }
    if spec.points.is_empty() {
        out.push(Violation::NoPoints);
    }
    let mut blocks = HashMap::new();
    for (i, b) in spec.blocks.iter().enumerate() {
        if blocks.insert(b.id.as_str(), i).is_some() {
            out.push(Violation::DuplicateBlock(b.id.clone()));
        }
        if !(b.length > 0.0 && b.speed_limit > 0.0) {
            out.push(Violation::BadBlockGeometry(b.id.clone()));
        }
    }
    let mut succ = vec![Vec::new(); spec.blocks.len()];
    for (a, b) in &spec.adjacency {
        match (blocks.get(a.as_str()), blocks.get(b.as_str())) {
            (Some(&i), Some(&j)) => succ[i].push(j),
            _ => out.push(Violation::DanglingEdge(a.clone(), b.clone())),
        }
    }
    let mut seen = BTreeSet::new();
    for p in &spec.points {
        if !seen.insert(p.id.as_str()) {
            out.push(Violation::DuplicatePoint(p.id.clone()));
        }
        if !blocks.contains_key(p.block.as_str()) {
            out.push(Violation::UnknownPointBlock {
                point: p.id.clone(),
                block: p.block.clone(),
            });
        }
        if p.kind == PointKind::Halt && p.platform_group.is_none() {
            out.push(Violation::HaltWithoutGroup(p.id.clone()));
        }
    }
    for (a, b) in &spec.crossing_pairs {
        if a == b || !blocks.contains_key(a.as_str()) || !blocks.contains_key(b.as_str()) {
            out.push(Violation::BadCrossingPair(a.clone(), b.clone()));
        }
    }
    let mut reach = vec![false; spec.blocks.len()];
    let mut queue = VecDeque::new();
    for p in spec.points.iter().filter(|p| p.kind == PointKind::Entry) {
        if let Some(&i) = blocks.get(p.block.as_str()) {
            if !reach[i] {
                reach[i] = true;
                queue.push_back(i);
            }
        }
    }
    while let Some(i) = queue.pop_front() {
        for &j in &succ[i] {
            if !reach[j] {
                reach[j] = true;
                queue.push_back(j);
            }
        }
    }
    for p in spec.points.iter().filter(|p| p.kind == PointKind::Exit) {
        if let Some(&i) = blocks.get(p.block.as_str()) {
            if !reach[i] {
                out.push(Violation::UnreachableExit(p.id.clone()));
            }
        }
    }
    out
}

/// Indexed, validated network. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    block_index: HashMap<String, usize>,
    point_index: HashMap<String, usize>,
    point_block: Vec<usize>,
    succ: Vec<Vec<usize>>,
    crossing: Vec<Vec<usize>>,
    groups: BTreeMap<String, Vec<usize>>,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self, ModelError> {
        let violations = validate_network(&spec);
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }
        let block_index: HashMap<String, usize> = spec
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id.clone(), i))
            .collect();
        let point_index = spec
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.clone(), i))
            .collect();
        let point_block = spec.points.iter().map(|p| block_index[&p.block]).collect();
        let mut succ = vec![Vec::new(); spec.blocks.len()];
        for (a, b) in &spec.adjacency {
            succ[block_index[a]].push(block_index[b]);
        }
        for s in &mut succ {
            s.sort_unstable();
            s.dedup();
        }
        let mut crossing = vec![Vec::new(); spec.blocks.len()];
        for (a, b) in &spec.crossing_pairs {
            let (i, j) = (block_index[a], block_index[b]);
            crossing[i].push(j);
            crossing[j].push(i);
        }
        for c in &mut crossing {
            c.sort_unstable();
            c.dedup();
        }
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, p) in spec.points.iter().enumerate() {
            if let Some(g) = &p.platform_group {
                groups.entry(g.clone()).or_default().push(i);
            }
        }
        Ok(Self {
            spec,
            block_index,
            point_index,
            point_block,
            succ,
            crossing,
            groups,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn num_blocks(&self) -> usize {
        self.spec.blocks.len()
    }

    pub fn block(&self, b: usize) -> &BlockSection {
        &self.spec.blocks[b]
    }

    pub fn block_id(&self, id: &str) -> Option<usize> {
        self.block_index.get(id).copied()
    }

    pub fn point(&self, p: usize) -> &DispatchingPoint {
        &self.spec.points[p]
    }

    pub fn point_id(&self, id: &str) -> Result<usize, ModelError> {
        self.point_index
            .get(id)
            .copied()
            .ok_or_else(|| ModelError::UnknownPoint(id.to_string()))
    }

    pub fn num_points(&self) -> usize {
        self.spec.points.len()
    }

    /// Block the train occupies while stopped at point `p`.
    pub fn point_block(&self, p: usize) -> usize {
        self.point_block[p]
    }

    pub fn successors(&self, b: usize) -> &[usize] {
        &self.succ[b]
    }

    pub fn crossing(&self, b: usize) -> &[usize] {
        &self.crossing[b]
    }

    /// True when `a` and `b` are the same block or a declared crossing pair.
    pub fn blocks_interfere(&self, a: usize, b: usize) -> bool {
        a == b || self.crossing[a].binary_search(&b).is_ok()
    }

    /// Points of a platform group; empty if the group is unknown.
    pub fn group_points(&self, group: &str) -> &[usize] {
        self.groups.get(group).map_or(&[], |v| v.as_slice())
    }

    pub fn groups(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.groups.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Stable content hash used to key profile caches.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(&self.spec).expect("network serialises");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub max_speed: f64,
    pub accel: f64,
    pub decel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledHalt {
    pub platform_group: String,
    pub min_dwell: Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainService {
    pub id: String,
    pub entry_point: String,
    pub exit_point: String,
    /// Scheduled arrival at the dispatching area (t_b before disturbance).
    pub entry_time: Time,
    pub scheduled_exit: Time,
    #[serde(default)]
    pub scheduled_halts: Vec<ScheduledHalt>,
    pub kinematics: Kinematics,
    #[serde(default)]
    pub disturbance: Time,
}

impl TrainService {
    /// Earliest departure into the area: entry time plus disturbance.
    pub fn earliest_departure(&self) -> Time {
        self.entry_time + self.disturbance
    }

    pub fn validate(&self, net: &Network) -> Result<(), ModelError> {
        let bad = |reason: &str| ModelError::InvalidService {
            service: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.scheduled_exit <= self.entry_time {
            return Err(bad("scheduled exit must follow the entry time"));
        }
        let k = &self.kinematics;
        if !(k.max_speed > 0.0 && k.accel > 0.0 && k.decel > 0.0) {
            return Err(bad("kinematics must be positive"));
        }
        if self.disturbance < 0 {
            return Err(bad("disturbance must be nonnegative"));
        }
        let entry = net.point_id(&self.entry_point)?;
        let exit = net.point_id(&self.exit_point)?;
        if net.point(entry).kind != PointKind::Entry {
            return Err(bad("entry_point is not an entry"));
        }
        if net.point(exit).kind != PointKind::Exit {
            return Err(bad("exit_point is not an exit"));
        }
        for h in &self.scheduled_halts {
            if net.group_points(&h.platform_group).is_empty() {
                return Err(bad(&format!("empty platform group `{}`", h.platform_group)));
            }
            if h.min_dwell < 0 {
                return Err(bad("negative dwell"));
            }
        }
        Ok(())
    }
}

/// Network plus the services to dispatch.
#[derive(Debug, Clone)]
pub struct Instance {
    pub network: Network,
    pub services: Vec<TrainService>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub format_version: u32,
    pub network: NetworkSpec,
    #[serde(default)]
    pub services: Vec<TrainService>,
}

impl Instance {
    pub fn new(network: Network, services: Vec<TrainService>) -> Result<Self, ModelError> {
        let mut ids = BTreeSet::new();
        for s in &services {
            s.validate(&network)?;
            if !ids.insert(s.id.as_str()) {
                return Err(ModelError::InvalidService {
                    service: s.id.clone(),
                    reason: "duplicate id".into(),
                });
            }
        }
        Ok(Self { network, services })
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(ModelError::FormatVersion(file.format_version));
        }
        Self::new(Network::new(file.network)?, file.services)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            format_version: FORMAT_VERSION,
            network: self.network.spec().clone(),
            services: self.services.clone(),
        };
        serde_json::to_string_pretty(&file).expect("instance serialises")
    }

    /// Copy with the first `n` services (all if `n` exceeds the count).
    pub fn with_first_services(&self, n: usize) -> Self {
        Self {
            network: self.network.clone(),
            services: self.services.iter().take(n).cloned().collect(),
        }
    }
}
