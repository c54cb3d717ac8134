//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::time::Duration;

use railcg::driver::Prepared;
use railcg::model::{synth, Instance, Network, Time};
use railcg::path::TrainPath;
use railcg::pricing::{Pricer, PricingEngine, PricingOutcome, PricingRequest};
use railcg::profiles::{ProfileCatalog, ProfileConfig, ProfileId, ProfileStore, SpeedProfile};
use railcg_lp::BundledSolver;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const HORIZON: Time = 1800;

/// Hull of conflicting offsets `t_b - t_a`, recomputed from the occupation
/// windows without the conflict catalog.
pub fn hull(net: &Network, a: &SpeedProfile, b: &SpeedProfile) -> Option<(Time, Time)> {
    let mut out: Option<(Time, Time)> = None;
    for (&ba, &(sa, ea)) in a.route.iter().zip(&a.occupations) {
        for (&bb, &(sb, eb)) in b.route.iter().zip(&b.occupations) {
            let same = ba == bb || net.crossing(ba).contains(&bb);
            if !same {
                continue;
            }
            // Overlap of [t_a + sa, t_a + ea) and [t_b + sb, t_b + eb).
            let (lo, hi) = (sa - eb + 1, ea - sb - 1);
            if lo <= hi {
                out = Some(match out {
                    Some((l, h)) => (l.min(lo), h.max(hi)),
                    None => (lo, hi),
                });
            }
        }
    }
    out
}

/// Exact joint optimum for instances whose paths are single profiles.
///
/// Every pair of conflicting profile choices forbids one interval of
/// departure offsets, so each pair is ordered one way or the other. With all
/// orders fixed the constraints are difference constraints and their least
/// solution minimises every nondecreasing delay at once. The search
/// enumerates profile choices and orders with a cost bound.
pub struct JointOracle<'a> {
    net: &'a Network,
    store: &'a ProfileStore,
    choices: Vec<Vec<ProfileId>>,
    earliest: Vec<Time>,
    scheduled: Vec<Time>,
    t_max: Time,
    intervals: HashMap<(ProfileId, ProfileId), Option<(Time, Time)>>,
    best: Time,
    best_choice: Vec<(ProfileId, Time)>,
    pub nodes: u64,
}

#[derive(Clone)]
struct Edge {
    from: usize,
    to: usize,
    weight: Time,
}

impl<'a> JointOracle<'a> {
    pub fn new(instance: &'a Instance, profiles: &'a ProfileCatalog, t_max: Time) -> Self {
        let choices: Vec<Vec<ProfileId>> = profiles
            .sets
            .iter()
            .map(|s| {
                for &v in &s.profiles {
                    assert!(
                        s.is_start(v) && s.is_end(v),
                        "oracle needs single-profile paths"
                    );
                }
                s.profiles.clone()
            })
            .collect();
        Self {
            net: &instance.network,
            store: &profiles.store,
            choices,
            earliest: instance
                .services
                .iter()
                .map(|s| s.earliest_departure())
                .collect(),
            scheduled: instance.services.iter().map(|s| s.scheduled_exit).collect(),
            t_max,
            intervals: HashMap::new(),
            best: Time::MAX,
            best_choice: Vec::new(),
            nodes: 0,
        }
    }

    fn interval(&mut self, a: ProfileId, b: ProfileId) -> Option<(Time, Time)> {
        if let Some(&v) = self.intervals.get(&(a, b)) {
            return v;
        }
        let v = hull(self.net, self.store.get(a), self.store.get(b));
        self.intervals.insert((a, b), v);
        v
    }

    /// Least times satisfying `t_i >= earliest_i` and every edge
    /// `t_to >= t_from + weight`; `None` on a positive cycle or past the
    /// horizon.
    fn least(&self, n: usize, picked: &[ProfileId], edges: &[Edge]) -> Option<Vec<Time>> {
        let mut t: Vec<Time> = self.earliest[..n].to_vec();
        for round in 0..=n {
            let mut changed = false;
            for e in edges {
                let cand = t[e.from] + e.weight;
                if cand > t[e.to] {
                    t[e.to] = cand;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            if round == n {
                return None;
            }
        }
        for i in 0..n {
            if t[i] + self.store.get(picked[i]).run_time > self.t_max {
                return None;
            }
        }
        Some(t)
    }

    fn cost(&self, picked: &[ProfileId], t: &[Time]) -> Time {
        picked
            .iter()
            .zip(t)
            .enumerate()
            .map(|(i, (&p, &ti))| (ti + self.store.get(p).run_time - self.scheduled[i]).max(0))
            .sum()
    }

    fn min_rest(&self, from: usize) -> Time {
        (from..self.choices.len())
            .map(|i| {
                self.choices[i]
                    .iter()
                    .map(|&p| {
                        (self.earliest[i] + self.store.get(p).run_time - self.scheduled[i]).max(0)
                    })
                    .min()
                    .unwrap_or(0)
            })
            .sum()
    }

    pub fn solve(mut self) -> Option<(Time, Vec<(ProfileId, Time)>)> {
        let mut picked = Vec::new();
        let mut edges = Vec::new();
        self.place(0, &mut picked, &mut edges);
        (self.best < Time::MAX).then_some((self.best, self.best_choice))
    }

    fn place(&mut self, i: usize, picked: &mut Vec<ProfileId>, edges: &mut Vec<Edge>) {
        if i == self.choices.len() {
            if let Some(t) = self.least(i, picked, edges) {
                let c = self.cost(picked, &t);
                if c < self.best {
                    self.best = c;
                    self.best_choice = picked.iter().copied().zip(t).collect();
                }
            }
            return;
        }
        for k in 0..self.choices[i].len() {
            let p = self.choices[i][k];
            picked.push(p);
            let pairs: Vec<(usize, (Time, Time))> = (0..i)
                .filter_map(|s| self.interval(picked[s], p).map(|iv| (s, iv)))
                .collect();
            self.orient(i, &pairs, 0, picked, edges);
            picked.pop();
        }
    }

    fn orient(
        &mut self,
        i: usize,
        pairs: &[(usize, (Time, Time))],
        k: usize,
        picked: &mut Vec<ProfileId>,
        edges: &mut Vec<Edge>,
    ) {
        self.nodes += 1;
        let Some(t) = self.least(i + 1, picked, edges) else {
            return;
        };
        if self.cost(picked, &t) + self.min_rest(i + 1) >= self.best {
            return;
        }
        if k == pairs.len() {
            self.place(i + 1, picked, edges);
            return;
        }
        let (s, (lo, hi)) = pairs[k];
        // Conflict iff lo <= t_i - t_s <= hi.
        for e in [
            Edge {
                from: s,
                to: i,
                weight: hi + 1,
            },
            Edge {
                from: i,
                to: s,
                weight: 1 - lo,
            },
        ] {
            edges.push(e);
            self.orient(i, pairs, k + 1, picked, edges);
            edges.pop();
        }
    }
}

/// Naive check of the oracle on tiny cases: every profile and every
/// integer departure time.
pub fn brute_force(instance: &Instance, profiles: &ProfileCatalog, t_max: Time) -> Option<Time> {
    let net = &instance.network;
    let store = &profiles.store;
    let n = instance.services.len();
    let mut best: Option<Time> = None;
    fn rec(
        i: usize,
        n: usize,
        instance: &Instance,
        profiles: &ProfileCatalog,
        net: &Network,
        store: &ProfileStore,
        t_max: Time,
        chosen: &mut Vec<(ProfileId, Time)>,
        cost: Time,
        best: &mut Option<Time>,
    ) {
        if best.is_some_and(|b| cost >= b) {
            return;
        }
        if i == n {
            *best = Some(cost);
            return;
        }
        let s = &instance.services[i];
        for &p in &profiles.sets[i].profiles {
            let f = store.get(p).run_time;
            for t in s.earliest_departure()..=t_max - f {
                let ok =
                    chosen
                        .iter()
                        .all(|&(q, tq)| match hull(net, store.get(q), store.get(p)) {
                            Some((lo, hi)) => !(lo..=hi).contains(&(t - tq)),
                            None => true,
                        });
                if ok {
                    chosen.push((p, t));
                    let d = (t + f - s.scheduled_exit).max(0);
                    rec(
                        i + 1,
                        n,
                        instance,
                        profiles,
                        net,
                        store,
                        t_max,
                        chosen,
                        cost + d,
                        best,
                    );
                    chosen.pop();
                }
            }
        }
    }
    rec(
        0,
        n,
        instance,
        profiles,
        net,
        store,
        t_max,
        &mut Vec::new(),
        0,
        &mut best,
    );
    best
}

/// Fixture profile settings: one profile per path, at most six per service.
pub fn fixture_config() -> railcg::profiles::ProfileConfig {
    railcg::profiles::ProfileConfig {
        k: 2,
        insert_halts: false,
        ..Default::default()
    }
}

/// Cheapest single-profile path of `service` against fixed opposing paths
/// by trying every profile and every integer departure time. A clique's
/// penalty applies when the path conflicts with each of its members.
/// Returns `(reduced cost, departure)` or `None` if every slot is blocked.
pub fn exhaustive_pricing(
    instance: &Instance,
    profiles: &ProfileCatalog,
    service: usize,
    alpha: f64,
    opposing: &[(ProfileId, Time)],
    cliques: &[(Vec<usize>, f64)],
    forbidden: &[usize],
    t_max: Time,
) -> Option<(f64, Time)> {
    let net = &instance.network;
    let store = &profiles.store;
    let s = &instance.services[service];
    let mut best: Option<(f64, Time)> = None;
    for &p in &profiles.sets[service].profiles {
        let f = store.get(p).run_time;
        let hulls: Vec<Option<(Time, Time)>> = opposing
            .iter()
            .map(|&(q, _)| hull(net, store.get(p), store.get(q)))
            .collect();
        for t in s.earliest_departure()..=t_max - f {
            let hits: Vec<bool> = opposing
                .iter()
                .zip(&hulls)
                .map(|(&(_, tq), h)| h.is_some_and(|(lo, hi)| (lo..=hi).contains(&(tq - t))))
                .collect();
            if forbidden.iter().any(|&b| hits[b]) {
                continue;
            }
            let delay = (t + f - s.scheduled_exit).max(0) as f64;
            let penalty: f64 = cliques
                .iter()
                .filter(|(m, _)| m.iter().all(|&b| hits[b]))
                .map(|(_, beta)| beta)
                .sum();
            let rc = delay - alpha + penalty;
            if best.is_none_or(|(b, _)| rc < b - 1e-12) {
                best = Some((rc, t));
            }
        }
    }
    best
}

/// Maximal cliques with at least two nodes by checking every subset.
pub fn brute_force_cliques(n: usize, adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let is_clique = |mask: u32| {
        (0..n)
            .all(|i| mask & (1 << i) == 0 || (i + 1..n).all(|j| mask & (1 << j) == 0 || adj[i][j]))
    };
    let cliques: Vec<u32> = (1u32..1 << n).filter(|&m| is_clique(m)).collect();
    let mut out: Vec<Vec<usize>> = cliques
        .iter()
        .filter(|&&m| m.count_ones() >= 2)
        .filter(|&&m| !cliques.iter().any(|&o| o != m && o & m == m))
        .map(|&m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect();
    out.sort();
    out
}

pub struct Fixture {
    pub instance: Instance,
    pub prepared: Prepared,
    pub pool: Vec<TrainPath>,
    pub cliques: Vec<(Vec<usize>, f64)>,
    pub forbidden: Vec<usize>,
    pub alpha: f64,
    pub t_max: Time,
}

/// Service 0 priced against one random path of every other service, with
/// random cliques over those paths.
pub fn fixture(seed: u64, config: &ProfileConfig, horizon: Time) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instance = synth::random_instance(seed, rng.random_range(2..=5));
    let prepared = Prepared::new(&instance, config).unwrap();
    let t_max = instance
        .services
        .iter()
        .map(|s| s.earliest_departure())
        .max()
        .unwrap()
        + horizon;
    let mut pool = Vec::new();
    for (r, s) in instance.services.iter().enumerate().skip(1) {
        let set = &prepared.profiles.sets[r];
        let chain = &set.chains()[rng.random_range(0..set.chains().len())];
        let mut t = s.earliest_departure() + rng.random_range(0..400);
        let mut steps = Vec::new();
        for &v in chain {
            steps.push((v, t));
            t += prepared.profiles.store.get(v).run_time;
        }
        pool.push(TrainPath::new(r, steps));
    }
    let m = pool.len();
    let cliques = (0..rng.random_range(0..=4))
        .map(|_| {
            let mut members: Vec<usize> = (0..m).filter(|_| rng.random_bool(0.5)).collect();
            if members.is_empty() {
                members.push(rng.random_range(0..m));
            }
            (members, rng.random_range(1..=400) as f64)
        })
        .collect();
    let forbidden = (0..m).filter(|_| rng.random_bool(0.15)).collect();
    Fixture {
        instance,
        prepared,
        pool,
        cliques,
        forbidden,
        alpha: rng.random_range(0..=200) as f64,
        t_max,
    }
}

pub fn price(f: &Fixture, engine: PricingEngine, time_limit: Option<Duration>) -> PricingOutcome {
    let backend = BundledSolver::default();
    let pricer = Pricer {
        services: &f.instance.services,
        sets: &f.prepared.profiles.sets,
        store: &f.prepared.profiles.store,
        catalog: &f.prepared.catalog,
        t_max: f.t_max,
        unclipped: false,
        backend: &backend,
        engine,
        service_edges: true,
    };
    let req = PricingRequest {
        service: 0,
        alpha: f.alpha,
        cliques: f.cliques.iter().map(|(m, b)| (m.as_slice(), *b)).collect(),
        forbidden: f.forbidden.clone(),
        time_limit,
        ..Default::default()
    };
    pricer.price(&req, &f.pool).unwrap()
}

pub fn oracle(f: &Fixture) -> Option<(f64, Time)> {
    let opposing: Vec<_> = f.pool.iter().map(|p| p.steps[0]).collect();
    exhaustive_pricing(
        &f.instance,
        &f.prepared.profiles,
        0,
        f.alpha,
        &opposing,
        &f.cliques,
        &f.forbidden,
        f.t_max,
    )
}

/// Places one opposing path on the free optimum of service 0 and prices
/// with its clique penalty one below and one above the detour cost. `None`
/// when the fixture has no positive detour cost, otherwise the mismatches.
pub fn penalty_flip(seed: u64) -> Option<Vec<String>> {
    let mut f = fixture(seed, &fixture_config(), HORIZON);
    f.cliques.clear();
    f.forbidden.clear();
    f.alpha = 0.0;
    f.pool.truncate(1);
    let free = price(&f, PricingEngine::Search, None).path.unwrap();
    let (w, _) = f.pool[0].steps[0];
    let start = f.instance.services[f.pool[0].service].earliest_departure();
    let t = (start..start + HORIZON).find(|&t| {
        let b = TrainPath::new(f.pool[0].service, vec![(w, t)]);
        f.prepared.catalog.paths_conflict(&free, &b)
    })?;
    f.pool[0] = TrainPath::new(f.pool[0].service, vec![(w, t)]);
    f.forbidden = vec![0];
    let (detour, _) = oracle(&f).unwrap();
    f.forbidden.clear();
    let (through, _) = oracle(&f).unwrap();
    let threshold = detour - through;
    if threshold < 2.0 {
        return None;
    }
    let mut errors = Vec::new();
    for (beta, conflicts) in [(threshold - 1.0, true), (threshold + 1.0, false)] {
        f.cliques = vec![(vec![0], beta)];
        for engine in [PricingEngine::Search, PricingEngine::Mip] {
            let out = price(&f, engine, None);
            let expected = (through + beta).min(detour);
            if out.conflicts.contains(&0) != conflicts
                || (out.reduced_cost - expected).abs() >= 1e-6
            {
                errors.push(format!(
                    "seed {seed} beta {beta} {engine:?}: rc {} expected {expected}",
                    out.reduced_cost
                ));
            }
        }
    }
    Some(errors)
}
