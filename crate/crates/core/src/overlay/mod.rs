//! Prefix-routed identifier ring over a physical edge topology.
//!
//! Each node keeps a prefix routing table whose cells hold the best entry by
//! proximity, and a leaf set of physically nearest peers. Route termination
//! uses the numeric ring neighbours, derived from the sorted live set, so a
//! route always ends at the node numerically closest to the key.

mod node_id;
mod topology;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::ops::Bound;

pub use node_id::{cell_range, digit_of, hash128, ring_distance, shared_prefix_len, NodeId};
pub use topology::{EdgeTopology, NodeSpec, RttModel};

const EMPTY: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OverlayError {
    #[error("node name {0:?} is already present")]
    DuplicateName(String),
    #[error("identifier collision for node {0:?}")]
    IdCollision(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is not live")]
    NotLive(NodeId),
    #[error("the ring has no live nodes")]
    EmptyRing,
    #[error("routing loop: {node} revisited while routing to {key:032x}")]
    RoutingLoop { node: NodeId, key: u128 },
    #[error("invalid overlay config: {0}")]
    Config(String),
    #[error("topology input: {0}")]
    Input(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlayConfig {
    /// Bits per identifier digit.
    pub digit_bits: u32,
    pub leaf_capacity: usize,
    /// Heartbeat timeout before survivors start repairing.
    pub detection_ms: f64,
}

impl Default for OverlayConfig {
    fn default() -> Self {
        Self {
            digit_bits: 4,
            leaf_capacity: 24,
            detection_ms: 200.0,
        }
    }
}

impl OverlayConfig {
    pub fn validate(&self) -> Result<(), OverlayError> {
        if ![1, 2, 4, 8].contains(&self.digit_bits) {
            return Err(OverlayError::Config(format!(
                "digit_bits must be one of 1, 2, 4, 8 (got {})",
                self.digit_bits
            )));
        }
        if self.leaf_capacity < 2 {
            return Err(OverlayError::Config(
                "leaf_capacity must be at least 2".into(),
            ));
        }
        if !self.detection_ms.is_finite() || self.detection_ms < 0.0 {
            return Err(OverlayError::Config(
                "detection_ms must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn columns(&self) -> usize {
        1 << self.digit_bits
    }

    pub fn rows(&self) -> u32 {
        128 / self.digit_bits
    }

    /// Smallest h with (2^b)^h >= n.
    pub fn log_hops(&self, n: usize) -> u32 {
        let mut h = 0;
        let mut reach: u128 = 1;
        while reach < n as u128 {
            reach <<= self.digit_bits;
            h += 1;
        }
        h
    }

    /// Route-length bound: log hops plus two terminal hops.
    pub fn hop_bound(&self, n: usize) -> u32 {
        self.log_hops(n) + 2
    }
}

/// Proximity metric attached to routing-table entries; compared
/// lexicographically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proximity {
    pub hop_count: u32,
    pub rtt_ms: f64,
    pub congestion: f64,
}

impl Proximity {
    fn cmp(&self, other: &Self) -> Ordering {
        self.hop_count
            .cmp(&other.hop_count)
            .then(self.rtt_ms.total_cmp(&other.rtt_ms))
            .then(self.congestion.total_cmp(&other.congestion))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutePath {
    pub nodes: Vec<NodeId>,
}

impl RoutePath {
    pub fn hops(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn destination(&self) -> NodeId {
        *self.nodes.last().expect("route paths are never empty")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RepairReport {
    pub failed: usize,
    pub entries_repaired: usize,
    pub nodes_touched: usize,
    /// Survivors repair in parallel; this is the slowest survivor.
    pub time_ms: f64,
}

#[derive(Debug, Clone)]
struct Node {
    id: NodeId,
    spec: NodeSpec,
    live: bool,
    congestion: f64,
    /// Row-major cells, rows allocated on demand.
    table: Vec<u32>,
    /// Proximity of each cell's entry when it was chosen.
    table_prox: Vec<Proximity>,
    /// Sorted by (physical distance, id).
    leaf: Vec<u32>,
    leaf_dist: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Overlay {
    cfg: OverlayConfig,
    rtt: RttModel,
    nodes: Vec<Node>,
    by_id: HashMap<NodeId, u32>,
    by_name: HashMap<String, u32>,
    ring: BTreeMap<u128, u32>,
}

impl Overlay {
    pub fn new(cfg: OverlayConfig, rtt: RttModel) -> Result<Self, OverlayError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            rtt,
            nodes: Vec::new(),
            by_id: HashMap::new(),
            by_name: HashMap::new(),
            ring: BTreeMap::new(),
        })
    }

    /// Joins every topology node in file order.
    pub fn build(topology: &EdgeTopology, cfg: OverlayConfig) -> Result<Self, OverlayError> {
        let mut overlay = Self::new(cfg, topology.rtt)?;
        for spec in &topology.nodes {
            overlay.join(spec.clone())?;
        }
        Ok(overlay)
    }

    pub fn config(&self) -> &OverlayConfig {
        &self.cfg
    }

    pub fn rtt_model(&self) -> &RttModel {
        &self.rtt
    }

    /// Number of live nodes.
    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    /// Live node ids in ring order.
    pub fn live_ids(&self) -> Vec<NodeId> {
        self.ring.keys().map(|&k| NodeId(k)).collect()
    }

    pub fn is_live(&self, id: NodeId) -> bool {
        self.ring.contains_key(&id.0)
    }

    pub fn id_of(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).map(|&i| self.nodes[i as usize].id)
    }

    pub fn spec(&self, id: NodeId) -> Result<&NodeSpec, OverlayError> {
        Ok(&self.nodes[self.idx(id)? as usize].spec)
    }

    pub fn set_congestion(&mut self, id: NodeId, level: f64) -> Result<(), OverlayError> {
        let i = self.idx(id)?;
        self.nodes[i as usize].congestion = level;
        Ok(())
    }

    pub fn rtt(&self, a: NodeId, b: NodeId) -> Result<f64, OverlayError> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        Ok(self.rtt_idx(a, b))
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> Result<f64, OverlayError> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        Ok(self.nodes[a as usize]
            .spec
            .distance(&self.nodes[b as usize].spec))
    }

    pub fn proximity(&self, from: NodeId, to: NodeId) -> Result<Proximity, OverlayError> {
        let (a, b) = (self.idx(from)?, self.idx(to)?);
        Ok(self.prox(a, b))
    }

    pub fn routing_entry(
        &self,
        owner: NodeId,
        row: u32,
        col: usize,
    ) -> Result<Option<NodeId>, OverlayError> {
        let n = &self.nodes[self.idx(owner)? as usize];
        let cell = row as usize * self.cfg.columns() + col;
        Ok(match n.table.get(cell) {
            Some(&e) if e != EMPTY => Some(self.nodes[e as usize].id),
            _ => None,
        })
    }

    /// All filled cells as (row, column, entry).
    pub fn routing_entries(
        &self,
        owner: NodeId,
    ) -> Result<Vec<(u32, usize, NodeId)>, OverlayError> {
        let cols = self.cfg.columns();
        let n = &self.nodes[self.idx(owner)? as usize];
        Ok(n.table
            .iter()
            .enumerate()
            .filter(|(_, &e)| e != EMPTY)
            .map(|(cell, &e)| ((cell / cols) as u32, cell % cols, self.nodes[e as usize].id))
            .collect())
    }

    /// Physically nearest peers, nearest first. Dead nodes keep their last
    /// leaf set.
    pub fn leaf_set(&self, id: NodeId) -> Result<Vec<NodeId>, OverlayError> {
        let n = &self.nodes[self.idx(id)? as usize];
        Ok(n.leaf.iter().map(|&i| self.nodes[i as usize].id).collect())
    }

    /// Up to leaf_capacity/2 live ring predecessors and successors.
    pub fn ring_neighbors(&self, id: NodeId) -> Result<Vec<NodeId>, OverlayError> {
        self.live_idx(id)?;
        let (preds, succs, _) = self.ring_window(id.0);
        let mut out: Vec<NodeId> = preds
            .into_iter()
            .chain(succs)
            .map(|i| self.nodes[i as usize].id)
            .collect();
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Live node numerically closest to `key` (ties: lower id).
    pub fn closest_node(&self, key: u128) -> Result<NodeId, OverlayError> {
        let succ = self
            .ring
            .range(key..)
            .next()
            .or_else(|| self.ring.iter().next())
            .ok_or(OverlayError::EmptyRing)?;
        let pred = self
            .ring
            .range(..key)
            .next_back()
            .or_else(|| self.ring.iter().next_back())
            .ok_or(OverlayError::EmptyRing)?;
        Ok(NodeId(closer(key, *succ.0, *pred.0)))
    }

    pub fn join(&mut self, spec: NodeSpec) -> Result<NodeId, OverlayError> {
        if self.by_name.contains_key(&spec.name) {
            return Err(OverlayError::DuplicateName(spec.name));
        }
        let id = NodeId::from_name(&spec.name);
        if self.by_id.contains_key(&id) {
            return Err(OverlayError::IdCollision(spec.name));
        }
        let x = self.nodes.len() as u32;
        self.nodes.push(Node {
            id,
            spec,
            live: true,
            congestion: 0.0,
            table: Vec::new(),
            table_prox: Vec::new(),
            leaf: Vec::new(),
            leaf_dist: Vec::new(),
        });
        let bits = self.cfg.digit_bits;
        // Index order keeps the scan cache-friendly.
        let members: Vec<u32> = (0..x).filter(|&i| self.nodes[i as usize].live).collect();

        let cap = self.cfg.leaf_capacity;
        let mut near: Vec<(f64, NodeId, u32)> = Vec::with_capacity(members.len());
        for &y in &members {
            let yid = self.nodes[y as usize].id;
            let d = self.dist_idx(x, y);
            let hop_count = if self.nodes[x as usize].spec.zone == self.nodes[y as usize].spec.zone
            {
                1
            } else {
                2
            };
            let rtt_ms = self.rtt.base_ms + self.rtt.ms_per_unit * d;
            let r = shared_prefix_len(id.0, yid.0, bits);
            let to_y = Proximity {
                hop_count,
                rtt_ms,
                congestion: self.nodes[y as usize].congestion,
            };
            let to_x = Proximity {
                hop_count,
                rtt_ms,
                congestion: 0.0,
            };
            // New node's own table, then the peer's.
            self.offer(x, r, digit_of(yid.0, r, bits), y, to_y);
            self.offer(y, r, digit_of(id.0, r, bits), x, to_x);
            self.offer_leaf(y, x, d);
            near.push((d, yid, y));
        }

        if near.len() > cap {
            near.select_nth_unstable_by(cap - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            near.truncate(cap);
        }
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        self.nodes[x as usize].leaf = near.iter().map(|e| e.2).collect();
        self.nodes[x as usize].leaf_dist = near.iter().map(|e| e.0).collect();

        self.by_id.insert(id, x);
        self.by_name
            .insert(self.nodes[x as usize].spec.name.clone(), x);
        self.ring.insert(id.0, x);
        Ok(id)
    }

    /// Candidates for the next hop from `at` towards `key`, best first by
    /// (rtt asc, capacity desc, id asc). Entries improving the shared
    /// prefix come first; if none exist, known nodes with an equal prefix
    /// that are numerically closer are offered instead.
    pub fn next_hop_candidates(&self, at: NodeId, key: u128) -> Result<Vec<NodeId>, OverlayError> {
        let a = self.live_idx(at)?;
        if at.0 == key {
            return Ok(Vec::new());
        }
        let (preds, succs, _) = self.ring_window(at.0);
        Ok(self
            .candidates(a, key, preds.iter().chain(succs.iter()).copied())
            .0
            .into_iter()
            .map(|i| self.nodes[i as usize].id)
            .collect())
    }

    pub fn route(&self, from: NodeId, key: u128) -> Result<RoutePath, OverlayError> {
        let mut cur = self.live_idx(from)?;
        let mut nodes = vec![from];
        let mut visited = HashSet::from([cur]);
        loop {
            let cur_id = self.nodes[cur as usize].id.0;
            if cur_id == key {
                return Ok(RoutePath { nodes });
            }
            let (preds, succs, all) = self.ring_window(cur_id);
            let covered = all || {
                let lo = self.nodes[*preds.last().expect("window non-empty") as usize]
                    .id
                    .0;
                let hi = self.nodes[*succs.last().expect("window non-empty") as usize]
                    .id
                    .0;
                key.wrapping_sub(lo) <= hi.wrapping_sub(lo)
            };
            let next = if covered {
                let best = preds
                    .iter()
                    .chain(succs.iter())
                    .copied()
                    .fold(cur, |b, i| self.closer_idx(key, b, i));
                if best == cur {
                    return Ok(RoutePath { nodes });
                }
                best
            } else {
                let neighbours = preds.iter().chain(succs.iter()).copied();
                match self.candidates(cur, key, neighbours) {
                    (c, true) => c[0],
                    // Rare case: numeric correction straight to the closest
                    // known node.
                    _ => self.closest_known(cur, key),
                }
            };
            let next_id = self.nodes[next as usize].id;
            if !visited.insert(next) {
                return Err(OverlayError::RoutingLoop { node: next_id, key });
            }
            nodes.push(next_id);
            cur = next;
        }
    }

    /// Removes `victims` and repairs every survivor's table and leaf set.
    pub fn fail_nodes(&mut self, victims: &[NodeId]) -> Result<RepairReport, OverlayError> {
        let mut dead = HashSet::new();
        for &v in victims {
            dead.insert(self.live_idx(v)?);
        }
        if dead.is_empty() {
            return Ok(RepairReport::default());
        }
        if dead.len() >= self.ring.len() {
            return Err(OverlayError::EmptyRing);
        }
        for &d in &dead {
            let n = &mut self.nodes[d as usize];
            n.live = false;
            self.ring.remove(&n.id.0);
        }

        let cols = self.cfg.columns();
        let bits = self.cfg.digit_bits;
        let survivors: Vec<u32> = self.ring.values().copied().collect();
        let mut report = RepairReport {
            failed: dead.len(),
            ..RepairReport::default()
        };
        for &s in &survivors {
            let mut repaired = 0usize;
            let owner = self.nodes[s as usize].id.0;
            for cell in 0..self.nodes[s as usize].table.len() {
                let e = self.nodes[s as usize].table[cell];
                if e == EMPTY || self.nodes[e as usize].live {
                    continue;
                }
                let (row, col) = ((cell / cols) as u32, cell % cols);
                let (lo, hi) = cell_range(owner, row, col, bits);
                let best = self
                    .ring
                    .range(lo..=hi)
                    .map(|(_, &i)| i)
                    .min_by(|&a, &b| self.rank(s, a, b))
                    .unwrap_or(EMPTY);
                if best != EMPTY {
                    self.nodes[s as usize].table_prox[cell] = self.prox(s, best);
                }
                self.nodes[s as usize].table[cell] = best;
                repaired += 1;
            }
            let lost = self.nodes[s as usize]
                .leaf
                .iter()
                .filter(|&&m| !self.nodes[m as usize].live)
                .count();
            if lost > 0 {
                let (leaf, dist) = self.nearest_live(s);
                self.nodes[s as usize].leaf = leaf;
                self.nodes[s as usize].leaf_dist = dist;
                repaired += lost;
            }
            if repaired > 0 {
                let helper = self.nodes[s as usize].leaf.first().copied();
                let rtt = helper.map_or(0.0, |h| self.rtt_idx(s, h));
                let t = self.cfg.detection_ms + repaired as f64 * rtt;
                report.time_ms = report.time_ms.max(t);
                report.entries_repaired += repaired;
                report.nodes_touched += 1;
            }
        }
        Ok(report)
    }

    fn idx(&self, id: NodeId) -> Result<u32, OverlayError> {
        self.by_id
            .get(&id)
            .copied()
            .ok_or(OverlayError::UnknownNode(id))
    }

    fn live_idx(&self, id: NodeId) -> Result<u32, OverlayError> {
        let i = self.idx(id)?;
        if self.nodes[i as usize].live {
            Ok(i)
        } else {
            Err(OverlayError::NotLive(id))
        }
    }

    fn rtt_idx(&self, a: u32, b: u32) -> f64 {
        self.rtt
            .rtt(&self.nodes[a as usize].spec, &self.nodes[b as usize].spec)
    }

    fn dist_idx(&self, a: u32, b: u32) -> f64 {
        self.nodes[a as usize]
            .spec
            .distance(&self.nodes[b as usize].spec)
    }

    fn prox(&self, from: u32, to: u32) -> Proximity {
        let (f, t) = (&self.nodes[from as usize], &self.nodes[to as usize]);
        Proximity {
            hop_count: if f.spec.zone == t.spec.zone { 1 } else { 2 },
            rtt_ms: self.rtt.rtt(&f.spec, &t.spec),
            congestion: t.congestion,
        }
    }

    /// Table-entry preference of `owner` between `a` and `b`.
    fn rank(&self, owner: u32, a: u32, b: u32) -> Ordering {
        self.prox(owner, a)
            .cmp(&self.prox(owner, b))
            .then(self.nodes[a as usize].id.cmp(&self.nodes[b as usize].id))
    }

    fn offer(&mut self, owner: u32, row: u32, col: usize, cand: u32, prox: Proximity) {
        let cols = self.cfg.columns();
        let cell = row as usize * cols + col;
        let cand_id = self.nodes[cand as usize].id;
        let node = &self.nodes[owner as usize];
        if cell >= node.table.len() {
            let new_len = (row as usize + 1) * cols;
            let node = &mut self.nodes[owner as usize];
            node.table.resize(new_len, EMPTY);
            node.table_prox.resize(new_len, prox);
        }
        let node = &self.nodes[owner as usize];
        let cur = node.table[cell];
        let better = cur == EMPTY
            || prox
                .cmp(&node.table_prox[cell])
                .then(cand_id.cmp(&self.nodes[cur as usize].id))
                == Ordering::Less;
        if better {
            let node = &mut self.nodes[owner as usize];
            node.table[cell] = cand;
            node.table_prox[cell] = prox;
        }
    }

    fn offer_leaf(&mut self, owner: u32, cand: u32, dist: f64) {
        let cap = self.cfg.leaf_capacity;
        let cand_id = self.nodes[cand as usize].id;
        let node = &self.nodes[owner as usize];
        let before = |i: usize| {
            node.leaf_dist[i]
                .total_cmp(&dist)
                .then(self.nodes[node.leaf[i] as usize].id.cmp(&cand_id))
                == Ordering::Less
        };
        if node.leaf.len() >= cap && before(node.leaf.len() - 1) {
            return;
        }
        let mut pos = node.leaf.len();
        while pos > 0 && !before(pos - 1) {
            pos -= 1;
        }
        let node = &mut self.nodes[owner as usize];
        node.leaf.insert(pos, cand);
        node.leaf_dist.insert(pos, dist);
        node.leaf.truncate(cap);
        node.leaf_dist.truncate(cap);
    }

    fn nearest_live(&self, owner: u32) -> (Vec<u32>, Vec<f64>) {
        let mut near: Vec<(f64, NodeId, u32)> = self
            .ring
            .values()
            .filter(|&&y| y != owner)
            .map(|&y| (self.dist_idx(owner, y), self.nodes[y as usize].id, y))
            .collect();
        let cap = self.cfg.leaf_capacity;
        let by = |a: &(f64, NodeId, u32), b: &(f64, NodeId, u32)| {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        };
        if near.len() > cap {
            near.select_nth_unstable_by(cap - 1, by);
            near.truncate(cap);
        }
        near.sort_by(by);
        (
            near.iter().map(|e| e.2).collect(),
            near.iter().map(|e| e.0).collect(),
        )
    }

    /// Live ring predecessors and successors of `pos` (nearest first), and
    /// whether together they cover every other live node.
    fn ring_window(&self, pos: u128) -> (Vec<u32>, Vec<u32>, bool) {
        let half = self.cfg.leaf_capacity / 2;
        let others = self.ring.len() - usize::from(self.ring.contains_key(&pos));
        if others <= 2 * half {
            let all: Vec<u32> = self
                .ring
                .iter()
                .filter(|(&k, _)| k != pos)
                .map(|(_, &i)| i)
                .collect();
            return (all, Vec::new(), true);
        }
        let after = (Bound::Excluded(pos), Bound::Unbounded);
        let succs = self
            .ring
            .range(after)
            .chain(self.ring.range(..pos))
            .take(half)
            .map(|(_, &i)| i)
            .collect();
        let preds = self
            .ring
            .range(..pos)
            .rev()
            .chain(self.ring.range(after).rev())
            .take(half)
            .map(|(_, &i)| i)
            .collect();
        (preds, succs, false)
    }

    /// Ordered candidates and whether they improve the shared prefix.
    fn candidates(
        &self,
        at: u32,
        key: u128,
        ring_nb: impl Iterator<Item = u32>,
    ) -> (Vec<u32>, bool) {
        let bits = self.cfg.digit_bits;
        let node = &self.nodes[at as usize];
        let l = shared_prefix_len(node.id.0, key, bits);
        let mut known: Vec<u32> = node
            .leaf
            .iter()
            .copied()
            .filter(|&m| self.nodes[m as usize].live)
            .collect();
        known.extend(ring_nb);
        let mut out: Vec<u32> = Vec::new();
        let cell = l as usize * self.cfg.columns() + digit_of(key, l, bits);
        if let Some(&e) = node.table.get(cell) {
            if e != EMPTY {
                out.push(e);
            }
        }
        out.extend(
            known
                .iter()
                .copied()
                .filter(|&m| shared_prefix_len(self.nodes[m as usize].id.0, key, bits) > l),
        );
        let improving = !out.is_empty();
        if !improving {
            let own = ring_distance(node.id.0, key);
            let table = node.table.iter().copied().filter(|&e| e != EMPTY);
            out.extend(known.iter().copied().chain(table).filter(|&m| {
                let mid = self.nodes[m as usize].id.0;
                shared_prefix_len(mid, key, bits) >= l && ring_distance(mid, key) < own
            }));
        }
        out.sort_by(|&a, &b| self.forward_order(at, a, b));
        out.dedup();
        (out, improving)
    }

    fn forward_order(&self, at: u32, a: u32, b: u32) -> Ordering {
        let (na, nb) = (&self.nodes[a as usize], &self.nodes[b as usize]);
        self.rtt_idx(at, a)
            .total_cmp(&self.rtt_idx(at, b))
            .then(nb.spec.capacity.total_cmp(&na.spec.capacity))
            .then(na.id.cmp(&nb.id))
    }

    /// Last resort when no candidate exists: the known node numerically
    /// closest to the key.
    fn closest_known(&self, at: u32, key: u128) -> u32 {
        let (preds, succs, _) = self.ring_window(self.nodes[at as usize].id.0);
        let node = &self.nodes[at as usize];
        node.table
            .iter()
            .copied()
            .filter(|&e| e != EMPTY)
            .chain(preds)
            .chain(succs)
            .fold(at, |b, i| self.closer_idx(key, b, i))
    }

    fn closer_idx(&self, key: u128, a: u32, b: u32) -> u32 {
        let (ia, ib) = (self.nodes[a as usize].id.0, self.nodes[b as usize].id.0);
        if closer(key, ia, ib) == ia {
            a
        } else {
            b
        }
    }
}

/// Whichever of `a`, `b` is nearer `key` on the ring (ties: lower id).
fn closer(key: u128, a: u128, b: u128) -> u128 {
    match ring_distance(a, key).cmp(&ring_distance(b, key)) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal => a.min(b),
    }
}

#[cfg(test)]
mod tests;
