//! Synthetic networks and instances used by tests, examples and scenarios.
//!
//! Corridors are chains of stations joined by single- or multi-track links.
//! Every physical block exists once per running direction (`>` eastbound,
//! `<` westbound) and the two directed copies form a crossing pair, so a
//! block can never be used in both directions at once.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    routes::k_shortest_routes, BlockSection, DispatchingPoint, Instance, Kinematics, Network,
    NetworkSpec, PointKind, ScheduledHalt, Time, TrainService,
};
use crate::profiles::{trapezoidal_run, BlockingMargins};

#[derive(Debug, Clone)]
pub struct StationSpec {
    pub name: String,
    pub platforms: usize,
    pub platform_length: f64,
    pub speed_limit: f64,
}

#[derive(Debug, Clone)]
pub struct LinkSpec {
    pub tracks: usize,
    pub blocks: usize,
    pub block_length: f64,
    pub speed_limit: f64,
}

#[derive(Debug, Clone)]
pub struct CorridorSpec {
    pub stations: Vec<StationSpec>,
    /// `links[i]` joins `stations[i]` and `stations[i + 1]`.
    pub links: Vec<LinkSpec>,
    pub bidirectional: bool,
}

impl StationSpec {
    pub fn new(name: &str, platforms: usize) -> Self {
        Self {
            name: name.to_string(),
            platforms,
            platform_length: 400.0,
            speed_limit: 20.0,
        }
    }
}

impl LinkSpec {
    pub fn single(blocks: usize, block_length: f64) -> Self {
        Self {
            tracks: 1,
            blocks,
            block_length,
            speed_limit: 40.0,
        }
    }
}

impl Default for CorridorSpec {
    fn default() -> Self {
        Self {
            stations: vec![
                StationSpec::new("W", 1),
                StationSpec::new("M", 2),
                StationSpec::new("E", 1),
            ],
            links: vec![LinkSpec::single(3, 800.0), LinkSpec::single(3, 800.0)],
            bidirectional: true,
        }
    }
}

/// Point id of platform `p` (1-based) at `station` for a direction.
pub fn platform_point(station: &str, p: usize, eastbound: bool) -> String {
    format!("{station}.{p}{}", if eastbound { '>' } else { '<' })
}

pub fn corridor(spec: &CorridorSpec) -> Network {
    assert_eq!(spec.stations.len(), spec.links.len() + 1);
    assert!(spec.stations.len() >= 2);
    let mut net = NetworkSpec::default();
    let dirs: &[bool] = if spec.bidirectional {
        &[true, false]
    } else {
        &[true]
    };
    let last = spec.stations.len() - 1;
    let tag = |east: bool| if east { '>' } else { '<' };

    let mut physical: Vec<(String, f64, f64)> = Vec::new();
    for s in &spec.stations {
        for p in 1..=s.platforms {
            physical.push((format!("{}.{p}", s.name), s.platform_length, s.speed_limit));
        }
    }
    for (i, l) in spec.links.iter().enumerate() {
        let name = format!("{}-{}", spec.stations[i].name, spec.stations[i + 1].name);
        for t in 1..=l.tracks {
            for j in 1..=l.blocks {
                physical.push((format!("{name}.{t}.{j}"), l.block_length, l.speed_limit));
            }
        }
    }
    for (id, length, speed) in &physical {
        for &east in dirs {
            net.blocks.push(BlockSection {
                id: format!("{id}{}", tag(east)),
                length: *length,
                speed_limit: *speed,
            });
        }
        if spec.bidirectional {
            net.crossing_pairs
                .push((format!("{id}>"), format!("{id}<")));
        }
    }

    for &east in dirs {
        let d = tag(east);
        for (i, l) in spec.links.iter().enumerate() {
            let (a, b) = (&spec.stations[i], &spec.stations[i + 1]);
            let name = format!("{}-{}", a.name, b.name);
            for t in 1..=l.tracks {
                let track: Vec<String> = (1..=l.blocks)
                    .map(|j| format!("{name}.{t}.{j}{d}"))
                    .collect();
                let (from, to, seq): (&StationSpec, &StationSpec, Vec<&String>) = if east {
                    (a, b, track.iter().collect())
                } else {
                    (b, a, track.iter().rev().collect())
                };
                for p in 1..=from.platforms {
                    net.adjacency
                        .push((format!("{}.{p}{d}", from.name), seq[0].clone()));
                }
                for w in seq.windows(2) {
                    net.adjacency.push((w[0].clone(), w[1].clone()));
                }
                for p in 1..=to.platforms {
                    net.adjacency
                        .push((seq[seq.len() - 1].clone(), format!("{}.{p}{d}", to.name)));
                }
            }
        }
        for (i, s) in spec.stations.iter().enumerate() {
            let kind = match (i, east) {
                (0, true) => PointKind::Entry,
                (0, false) => PointKind::Exit,
                (i, true) if i == last => PointKind::Exit,
                (i, false) if i == last => PointKind::Entry,
                _ => PointKind::Halt,
            };
            for p in 1..=s.platforms {
                let id = platform_point(&s.name, p, east);
                net.points.push(DispatchingPoint {
                    id: id.clone(),
                    kind,
                    platform_group: Some(s.name.clone()),
                    block: id,
                });
            }
        }
    }
    Network::new(net).expect("corridor builder yields a valid network")
}

/// Straight line of `n` blocks with points `in` and `out` at its ends.
pub fn line(n: usize, block_length: f64) -> Network {
    assert!(n >= 2);
    let mut spec = NetworkSpec::default();
    for i in 0..n {
        spec.blocks.push(BlockSection {
            id: format!("b{i}"),
            length: block_length,
            speed_limit: 30.0,
        });
        if i > 0 {
            spec.adjacency
                .push((format!("b{}", i - 1), format!("b{i}")));
        }
    }
    spec.points.push(point("in", PointKind::Entry, "b0"));
    spec.points
        .push(point("out", PointKind::Exit, &format!("b{}", n - 1)));
    Network::new(spec).expect("valid line")
}

/// `s -> {a, b} -> t` with side lengths `a` and `b`.
pub fn diamond(a: f64, b: f64) -> Network {
    let mk = |id: &str, length: f64| BlockSection {
        id: id.into(),
        length,
        speed_limit: 30.0,
    };
    let spec = NetworkSpec {
        blocks: vec![mk("s", 100.0), mk("a", a), mk("b", b), mk("t", 50.0)],
        adjacency: vec![
            ("s".into(), "a".into()),
            ("s".into(), "b".into()),
            ("a".into(), "t".into()),
            ("b".into(), "t".into()),
        ],
        points: vec![
            point("in", PointKind::Entry, "s"),
            point("out", PointKind::Exit, "t"),
        ],
        crossing_pairs: vec![],
    };
    Network::new(spec).expect("valid diamond")
}

fn point(id: &str, kind: PointKind, block: &str) -> DispatchingPoint {
    DispatchingPoint {
        id: id.into(),
        kind,
        platform_group: None,
        block: block.into(),
    }
}

/// Two stations with two platforms each between terminals, joined by a
/// double-track link with crossovers at both stations.
pub fn two_station_line() -> Network {
    corridor(&two_station_spec())
}

pub fn two_station_spec() -> CorridorSpec {
    CorridorSpec {
        stations: vec![
            StationSpec::new("A", 1),
            StationSpec::new("S1", 2),
            StationSpec::new("S2", 2),
            StationSpec::new("B", 1),
        ],
        links: vec![
            LinkSpec::single(2, 600.0),
            LinkSpec {
                tracks: 2,
                ..LinkSpec::single(3, 900.0)
            },
            LinkSpec::single(2, 600.0),
        ],
        bidirectional: true,
    }
}

/// Three stations where only the middle one has two platforms; the
/// canonical halting example `S1 -> S2 -> S3`.
pub fn three_station_spec() -> CorridorSpec {
    CorridorSpec {
        stations: vec![
            StationSpec::new("S1", 1),
            StationSpec::new("S2", 2),
            StationSpec::new("S3", 1),
        ],
        links: vec![LinkSpec::single(2, 700.0), LinkSpec::single(2, 700.0)],
        bidirectional: true,
    }
}

#[derive(Debug, Clone)]
pub struct ServiceTemplate {
    pub id: String,
    pub eastbound: bool,
    pub entry_time: Time,
    /// Extra seconds on top of the fastest possible run.
    pub slack: Time,
    pub halts: Vec<(String, Time)>,
    pub kinematics: Kinematics,
}

impl ServiceTemplate {
    pub fn new(id: &str, eastbound: bool, entry_time: Time, slack: Time) -> Self {
        Self {
            id: id.into(),
            eastbound,
            entry_time,
            slack,
            halts: Vec::new(),
            kinematics: Kinematics {
                max_speed: 30.0,
                accel: 0.8,
                decel: 0.8,
            },
        }
    }
}

/// Fastest unobstructed run time along shortest routes including dwells.
pub fn nominal_run_time(net: &Network, service: &TrainService) -> Time {
    let margins = BlockingMargins::default();
    let mut stops = vec![vec![net.point_id(&service.entry_point).expect("entry")]];
    let mut dwells = Vec::new();
    for h in &service.scheduled_halts {
        stops.push(net.group_points(&h.platform_group).to_vec());
        dwells.push(h.min_dwell);
    }
    stops.push(vec![net.point_id(&service.exit_point).expect("exit")]);
    dwells.push(0);
    let mut total = 0;
    for (leg, dwell) in stops.windows(2).zip(dwells) {
        let mut best = Time::MAX;
        for &a in &leg[0] {
            for &b in &leg[1] {
                if let Ok(routes) = k_shortest_routes(net, a, b, 1, 1.0) {
                    let r = &routes[0];
                    let lengths: Vec<f64> =
                        r.blocks[1..].iter().map(|&x| net.block(x).length).collect();
                    let vmax = r.blocks[1..]
                        .iter()
                        .map(|&x| net.block(x).speed_limit)
                        .fold(service.kinematics.max_speed, f64::min);
                    let k = service.kinematics;
                    if let Ok(run) = trapezoidal_run(&lengths, vmax, k.accel, k.decel, 0, &margins)
                    {
                        best = best.min(run.run_time);
                    }
                }
            }
        }
        total += best + dwell;
    }
    total
}

pub fn corridor_instance(spec: &CorridorSpec, templates: &[ServiceTemplate]) -> Instance {
    let net = corridor(spec);
    let first = &spec.stations[0].name;
    let last = &spec.stations[spec.stations.len() - 1].name;
    let services = templates
        .iter()
        .map(|t| {
            let (from, to) = if t.eastbound {
                (first, last)
            } else {
                (last, first)
            };
            let mut s = TrainService {
                id: t.id.clone(),
                entry_point: platform_point(from, 1, t.eastbound),
                exit_point: platform_point(to, 1, t.eastbound),
                entry_time: t.entry_time,
                scheduled_exit: t.entry_time + 1,
                scheduled_halts: t
                    .halts
                    .iter()
                    .map(|(g, d)| ScheduledHalt {
                        platform_group: g.clone(),
                        min_dwell: *d,
                    })
                    .collect(),
                kinematics: t.kinematics,
                disturbance: 0,
            };
            s.scheduled_exit = t.entry_time + nominal_run_time(&net, &s) + t.slack;
            s
        })
        .collect();
    Instance::new(net, services).expect("templates reference corridor points")
}

/// Small random corridor instance with `n` services in both directions.
///
/// Services never have scheduled halts, so with halt insertion disabled
/// every train path consists of a single speed-profile.
pub fn random_instance(seed: u64, n: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = CorridorSpec {
        stations: vec![
            StationSpec::new("W", 1),
            StationSpec::new("M", rng.random_range(1..=2)),
            StationSpec::new("E", 1),
        ],
        links: vec![
            LinkSpec::single(
                rng.random_range(1..=2),
                rng.random_range(4..=8) as f64 * 100.0,
            ),
            LinkSpec::single(
                rng.random_range(1..=2),
                rng.random_range(4..=8) as f64 * 100.0,
            ),
        ],
        bidirectional: true,
    };
    let templates: Vec<ServiceTemplate> = (0..n)
        .map(|i| {
            let mut t = ServiceTemplate::new(
                &format!("T{i}"),
                rng.random_bool(0.5),
                rng.random_range(0..=300),
                rng.random_range(0..=90),
            );
            t.kinematics.max_speed = [20.0, 30.0, 40.0][rng.random_range(0..3)];
            t
        })
        .collect();
    corridor_instance(&spec, &templates)
}

/// Timetable of `n` services on the two-station corridor: alternating
/// directions every two minutes, every third service halting at both
/// stations.
pub fn demo_instance(n: usize) -> Instance {
    let templates: Vec<ServiceTemplate> = (0..n)
        .map(|i| {
            let mut t =
                ServiceTemplate::new(&format!("T{:02}", i + 1), i % 2 == 0, 120 * i as Time, 60);
            if i % 3 == 2 {
                t.halts = vec![("S1".into(), 60), ("S2".into(), 60)];
                if !t.eastbound {
                    t.halts.reverse();
                }
            }
            t.kinematics.max_speed = [30.0, 40.0, 25.0][i % 3];
            t
        })
        .collect();
    corridor_instance(&two_station_spec(), &templates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corridor_shapes() {
        let net = corridor(&CorridorSpec::default());
        // 4 platforms + 6 link blocks, two directions each.
        assert_eq!(net.num_blocks(), 20);
        let b = net.block_id("W-M.1.1>").unwrap();
        let c = net.block_id("W-M.1.1<").unwrap();
        assert!(net.blocks_interfere(b, c));
        let e = net.point_id("W.1>").unwrap();
        assert_eq!(net.point(e).kind, PointKind::Entry);
        let m = net.point_id("M.2<").unwrap();
        assert_eq!(net.point(m).kind, PointKind::Halt);
        assert_eq!(net.group_points("M").len(), 4);
    }

    #[test]
    fn random_instances_are_valid() {
        for seed in 0..20 {
            let inst = random_instance(seed, 4);
            assert_eq!(inst.services.len(), 4);
            for s in &inst.services {
                assert!(s.scheduled_exit > s.entry_time);
            }
        }
    }
}
