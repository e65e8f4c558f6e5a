use std::collections::{BTreeMap, HashMap};

use super::DataflowError;
use crate::overlay::{NodeId, Overlay};

pub const DEFAULT_APPS_PER_SCHEDULER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub scheduler: NodeId,
    /// Overlay hops from the requesting node to the scheduler.
    pub hops: usize,
    pub elected: bool,
}

/// Per-zone schedulers. Lookups are hop-bounded overlay routes standing in
/// for gossip; elections are serialized in call order.
#[derive(Debug, Clone)]
pub struct SchedulerRegistry {
    pub threshold: usize,
    schedulers: BTreeMap<u32, Vec<NodeId>>,
    load: HashMap<NodeId, usize>,
    assignments: BTreeMap<String, NodeId>,
}

impl Default for SchedulerRegistry {
    fn default() -> Self {
        Self::new(DEFAULT_APPS_PER_SCHEDULER)
    }
}

impl SchedulerRegistry {
    pub fn new(threshold: usize) -> Self {
        Self {
            threshold: threshold.max(1),
            schedulers: BTreeMap::new(),
            load: HashMap::new(),
            assignments: BTreeMap::new(),
        }
    }

    pub fn schedulers_in(&self, zone: u32) -> &[NodeId] {
        self.schedulers.get(&zone).map_or(&[], Vec::as_slice)
    }

    pub fn zones(&self) -> impl Iterator<Item = (u32, &[NodeId])> {
        self.schedulers.iter().map(|(z, s)| (*z, s.as_slice()))
    }

    pub fn load(&self, scheduler: NodeId) -> usize {
        self.load.get(&scheduler).copied().unwrap_or(0)
    }

    pub fn assignment(&self, app_id: &str) -> Option<NodeId> {
        self.assignments.get(app_id).copied()
    }

    pub fn find_or_elect(
        &mut self,
        overlay: &Overlay,
        app_id: &str,
        origin: NodeId,
    ) -> Result<Assignment, DataflowError> {
        if self.assignments.contains_key(app_id) {
            return Err(DataflowError::DuplicateApp(app_id.to_string()));
        }
        if !overlay.is_live(origin) {
            return Err(DataflowError::NotLive(origin));
        }
        let zone = overlay.spec(origin)?.zone;
        let bound = overlay.config().log_hops(overlay.len()) as usize;

        let mut best: Option<(usize, NodeId)> = None;
        for &s in self.schedulers_in(zone) {
            if !overlay.is_live(s) || self.load(s) >= self.threshold {
                continue;
            }
            let hops = overlay.route(origin, s.0)?.hops();
            if hops <= bound && best.is_none_or(|(h, _)| hops < h) {
                best = Some((hops, s));
            }
        }
        let (hops, scheduler, elected) = match best {
            Some((h, s)) => (h, s, false),
            None => {
                let s = self.elect(overlay, zone)?;
                (overlay.route(origin, s.0)?.hops(), s, true)
            }
        };
        *self.load.entry(scheduler).or_insert(0) += 1;
        self.assignments.insert(app_id.to_string(), scheduler);
        Ok(Assignment {
            scheduler,
            hops,
            elected,
        })
    }

    /// Highest-capacity live node of `zone` that is not yet a scheduler
    /// (ties: lowest id).
    fn elect(&mut self, overlay: &Overlay, zone: u32) -> Result<NodeId, DataflowError> {
        let current = self.schedulers.entry(zone).or_default();
        let mut best: Option<(f64, NodeId)> = None;
        let mut any_live = false;
        for id in overlay.live_ids() {
            let spec = overlay.spec(id)?;
            if spec.zone != zone {
                continue;
            }
            any_live = true;
            if current.contains(&id) {
                continue;
            }
            // live_ids is ascending, so strict > keeps the lowest id on ties.
            if best.is_none_or(|(c, _)| spec.capacity > c) {
                best = Some((spec.capacity, id));
            }
        }
        if !any_live {
            return Err(DataflowError::EmptyZone(zone));
        }
        let (_, id) = best.ok_or(DataflowError::SchedulersExhausted(zone))?;
        current.push(id);
        Ok(id)
    }
}
