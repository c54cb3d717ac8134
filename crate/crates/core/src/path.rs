//! Train paths: chains of speed-profiles with departure times.

use serde::{Deserialize, Serialize};

use crate::model::{Time, TrainService};
use crate::profiles::{ProfileId, ProfileSet, ProfileStore};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrainPath {
    pub service: usize,
    /// Profiles in chain order with their departure times.
    pub steps: Vec<(ProfileId, Time)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathDefect {
    Empty,
    WrongService(ProfileId),
    NotAStart(ProfileId),
    NotAnEnd(ProfileId),
    BrokenChain(ProfileId, ProfileId),
    EarlyDeparture { earliest: Time, got: Time },
    Overtakes(ProfileId),
}

impl TrainPath {
    pub fn new(service: usize, steps: Vec<(ProfileId, Time)>) -> Self {
        Self { service, steps }
    }

    pub fn departure(&self) -> Time {
        self.steps[0].1
    }

    /// Time the last profile finishes, t_e.
    pub fn exit_time(&self, store: &ProfileStore) -> Time {
        let &(v, t) = self.steps.last().expect("paths are nonempty");
        t + store.get(v).run_time
    }

    /// Exit delay, clipped at zero unless `unclipped`.
    pub fn delay(&self, store: &ProfileStore, service: &TrainService, unclipped: bool) -> Time {
        let d = self.exit_time(store) - service.scheduled_exit;
        if unclipped {
            d
        } else {
            d.max(0)
        }
    }

    pub fn validate(
        &self,
        set: &ProfileSet,
        store: &ProfileStore,
        service: &TrainService,
    ) -> Result<(), PathDefect> {
        let (&(first, t0), &(last, _)) = match (self.steps.first(), self.steps.last()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(PathDefect::Empty),
        };
        for &(v, _) in &self.steps {
            if store.get(v).service != self.service {
                return Err(PathDefect::WrongService(v));
            }
        }
        if !set.is_start(first) {
            return Err(PathDefect::NotAStart(first));
        }
        if !set.is_end(last) {
            return Err(PathDefect::NotAnEnd(last));
        }
        if t0 < service.earliest_departure() {
            return Err(PathDefect::EarlyDeparture {
                earliest: service.earliest_departure(),
                got: t0,
            });
        }
        for pair in self.steps.windows(2) {
            let ((v, tv), (w, tw)) = (pair[0], pair[1]);
            if !set.successors_of(v).contains(&w) {
                return Err(PathDefect::BrokenChain(v, w));
            }
            if tw < tv + store.get(v).run_time {
                return Err(PathDefect::Overtakes(w));
            }
        }
        Ok(())
    }
}
