//! Headway intervals between speed-profiles of different services and the
//! extra conditions created by trains waiting at dispatching points.
//!
//! For profiles `v` and `w` the catalog stores the hull `[lo, hi]` of all
//! offsets `t_w - t_v` at which some pair of interfering blocks is held by
//! both at once. A train that waits at the end of `w` before starting its
//! successor `w'` keeps holding the last block of `w`; for a profile `v`
//! using that block, departure times conflict when
//! `t_v - t_w >= lo` and `t_v - t_w' <= hi - f_w`, with `[lo, hi]` taken over
//! the block pairs at the waiting point only.

use std::collections::HashMap;

use crate::model::{Network, Time};
use crate::path::TrainPath;
use crate::profiles::{ProfileId, ProfileSet, ProfileStore};

/// Closed integer interval of offsets.
pub type Interval = (Time, Time);

#[derive(Debug, Clone, Default)]
pub struct ConflictCatalog {
    /// Keyed by `(a, b)` with `a < b`; interval on `t_b - t_a`.
    pairs: HashMap<(ProfileId, ProfileId), Interval>,
    /// Keyed by `(w, v)` for `w` with successors; interval on `t_v - t_w`.
    halting: HashMap<(ProfileId, ProfileId), Interval>,
    has_successor: Vec<bool>,
    run_time: Vec<Time>,
}

fn hull(slot: &mut Option<Interval>, lo: Time, hi: Time) {
    if lo > hi {
        return;
    }
    *slot = Some(match *slot {
        Some((a, b)) => (a.min(lo), b.max(hi)),
        None => (lo, hi),
    });
}

/// Offsets `t_b - t_a` at which half-open windows `wa` (relative to `t_a`)
/// and `wb` (relative to `t_b`) overlap.
pub fn window_overlap(wa: Interval, wb: Interval) -> Interval {
    (wa.0 - wb.1 + 1, wa.1 - wb.0 - 1)
}

impl ConflictCatalog {
    pub fn build(net: &Network, store: &ProfileStore, sets: &[ProfileSet]) -> Self {
        let mut by_block: Vec<Vec<(ProfileId, usize)>> = vec![Vec::new(); net.num_blocks()];
        let mut has_successor = vec![false; store.len()];
        let mut run_time = vec![0; store.len()];
        for set in sets {
            for &id in &set.profiles {
                let p = store.get(id);
                for (i, &b) in p.route.iter().enumerate() {
                    by_block[b].push((id, i));
                }
                has_successor[id.index()] = !set.successors_of(id).is_empty();
                run_time[id.index()] = p.run_time;
            }
        }

        let mut pairs: HashMap<(ProfileId, ProfileId), Option<Interval>> = HashMap::new();
        for b in 0..net.num_blocks() {
            let mut others = vec![b];
            others.extend_from_slice(net.crossing(b));
            for &c in &others {
                for &(p, i) in &by_block[b] {
                    let pp = store.get(p);
                    for &(q, j) in &by_block[c] {
                        let qq = store.get(q);
                        if pp.service >= qq.service {
                            continue;
                        }
                        let (key, (lo, hi)) = if p < q {
                            ((p, q), window_overlap(pp.occupations[i], qq.occupations[j]))
                        } else {
                            ((q, p), window_overlap(qq.occupations[j], pp.occupations[i]))
                        };
                        hull(pairs.entry(key).or_default(), lo, hi);
                    }
                }
            }
        }

        let mut halting: HashMap<(ProfileId, ProfileId), Option<Interval>> = HashMap::new();
        for set in sets {
            for &w in &set.profiles {
                if !has_successor[w.index()] {
                    continue;
                }
                let ww = store.get(w);
                let p = ww.last_block();
                let window = *ww.occupations.last().expect("nonempty");
                let mut others = vec![p];
                others.extend_from_slice(net.crossing(p));
                for &c in &others {
                    for &(v, j) in &by_block[c] {
                        let vv = store.get(v);
                        if vv.service == ww.service {
                            continue;
                        }
                        let (lo, hi) = window_overlap(window, vv.occupations[j]);
                        hull(halting.entry((w, v)).or_default(), lo, hi);
                    }
                }
            }
        }

        Self {
            pairs: pairs
                .into_iter()
                .filter_map(|(k, v)| v.map(|v| (k, v)))
                .collect(),
            halting: halting
                .into_iter()
                .filter_map(|(k, v)| v.map(|v| (k, v)))
                .collect(),
            has_successor,
            run_time,
        }
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn num_halting(&self) -> usize {
        self.halting.len()
    }

    /// Conflicting offsets `t_w - t_v`, if any.
    pub fn interval(&self, v: ProfileId, w: ProfileId) -> Option<Interval> {
        if v < w {
            self.pairs.get(&(v, w)).copied()
        } else {
            self.pairs.get(&(w, v)).map(|&(lo, hi)| (-hi, -lo))
        }
    }

    /// Interval on `t_v - t_w` for a train waiting at the end of `w`.
    pub fn halting_interval(&self, w: ProfileId, v: ProfileId) -> Option<Interval> {
        if !self.has_successor[w.index()] {
            return None;
        }
        self.halting.get(&(w, v)).copied()
    }

    pub fn profiles_conflict(&self, v: ProfileId, tv: Time, w: ProfileId, tw: Time) -> bool {
        self.interval(v, w)
            .is_some_and(|(lo, hi)| (lo..=hi).contains(&(tw - tv)))
    }

    /// Train waits at the end of `w` (departed `tw`) until `tw_next`.
    pub fn halting_conflict(
        &self,
        w: ProfileId,
        tw: Time,
        tw_next: Time,
        v: ProfileId,
        tv: Time,
    ) -> bool {
        self.halting_interval(w, v)
            .is_some_and(|(lo, hi)| tv - tw >= lo && tv - tw_next <= hi - self.run_time[w.index()])
    }

    fn one_way(&self, a: &TrainPath, b: &TrainPath) -> bool {
        for pair in a.steps.windows(2) {
            let ((w, tw), (_, tn)) = (pair[0], pair[1]);
            for &(v, tv) in &b.steps {
                if self.halting_conflict(w, tw, tn, v, tv) {
                    return true;
                }
            }
        }
        false
    }

    pub fn paths_conflict(&self, a: &TrainPath, b: &TrainPath) -> bool {
        if a.service == b.service {
            return false;
        }
        for &(v, tv) in &a.steps {
            for &(w, tw) in &b.steps {
                if self.profiles_conflict(v, tv, w, tw) {
                    return true;
                }
            }
        }
        self.one_way(a, b) || self.one_way(b, a)
    }
}
