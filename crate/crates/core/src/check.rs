//! Solution checker working on absolute block occupations.
//!
//! Shares no code with the conflict catalog: every path is expanded into
//! the time intervals during which it holds each block, including the time
//! spent waiting at dispatching points, and intervals are compared directly.

use crate::model::{Network, Time, TrainService};
use crate::path::TrainPath;
use crate::profiles::{BlockingMargins, ProfileSet, ProfileStore};

/// Block and half-open absolute interval.
pub type Occupation = (usize, Time, Time);

pub fn occupations(
    path: &TrainPath,
    store: &ProfileStore,
    margins: &BlockingMargins,
) -> Vec<Occupation> {
    let mut out = Vec::new();
    for (k, &(v, t)) in path.steps.iter().enumerate() {
        let p = store.get(v);
        for (&b, &(s, e)) in p.route.iter().zip(&p.occupations) {
            out.push((b, t + s, t + e));
        }
        if let Some(&(_, next)) = path.steps.get(k + 1) {
            out.push((
                p.last_block(),
                t + p.run_time,
                next + margins.clear + margins.release,
            ));
        }
    }
    out
}

pub fn occupancy_conflict(
    net: &Network,
    store: &ProfileStore,
    margins: &BlockingMargins,
    a: &TrainPath,
    b: &TrainPath,
) -> bool {
    let oa = occupations(a, store, margins);
    let ob = occupations(b, store, margins);
    oa.iter().any(|&(ba, sa, ea)| {
        ob.iter()
            .any(|&(bb, sb, eb)| net.blocks_interfere(ba, bb) && sa < eb && sb < ea)
    })
}

/// Human-readable list of everything wrong with a full dispatching solution.
pub fn check_solution(
    net: &Network,
    services: &[TrainService],
    sets: &[ProfileSet],
    store: &ProfileStore,
    margins: &BlockingMargins,
    paths: &[TrainPath],
) -> Vec<String> {
    let mut out = Vec::new();
    if paths.len() != services.len() {
        out.push(format!(
            "{} paths for {} services",
            paths.len(),
            services.len()
        ));
        return out;
    }
    for (i, p) in paths.iter().enumerate() {
        if p.service != i {
            out.push(format!("path {i} belongs to service {}", p.service));
            continue;
        }
        if let Err(e) = p.validate(&sets[i], store, &services[i]) {
            out.push(format!("service `{}`: {e:?}", services[i].id));
        }
    }
    for i in 0..paths.len() {
        for j in i + 1..paths.len() {
            if occupancy_conflict(net, store, margins, &paths[i], &paths[j]) {
                out.push(format!(
                    "services `{}` and `{}` overlap",
                    services[i].id, services[j].id
                ));
            }
        }
    }
    out
}
