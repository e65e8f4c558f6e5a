use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::BanditError;
use crate::simkernel::SimRng;

pub const THETA_MIN: f64 = 0.01;
pub const DEFAULT_PATH_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub src: u32,
    pub dst: u32,
    /// Per-attempt success probability.
    pub theta: f64,
    pub base_delay_ms: f64,
}

impl Link {
    /// base delay x E[attempts].
    pub fn expected_delay(&self) -> f64 {
        self.base_delay_ms / self.theta
    }
}

/// A loop-free path as a sequence of link indices.
pub type LinkPath = Vec<usize>;

/// Directed graph of unreliable links between one source and one sink.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGraph {
    nodes: usize,
    links: Vec<Link>,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
    pub source: u32,
    pub sink: u32,
}

impl NetGraph {
    pub fn new(
        nodes: usize,
        links: Vec<Link>,
        source: u32,
        sink: u32,
    ) -> Result<Self, BanditError> {
        if source as usize >= nodes || sink as usize >= nodes {
            return Err(BanditError::Graph(format!(
                "source {source} or sink {sink} outside {nodes} nodes"
            )));
        }
        if source == sink {
            return Err(BanditError::Graph("source and sink coincide".into()));
        }
        let mut seen = BTreeSet::new();
        let mut out = vec![Vec::new(); nodes];
        let mut inc = vec![Vec::new(); nodes];
        for (i, l) in links.iter().enumerate() {
            if l.src as usize >= nodes || l.dst as usize >= nodes || l.src == l.dst {
                return Err(BanditError::Graph(format!(
                    "bad link {} -> {}",
                    l.src, l.dst
                )));
            }
            if !seen.insert((l.src, l.dst)) {
                return Err(BanditError::Graph(format!(
                    "duplicate link {} -> {}",
                    l.src, l.dst
                )));
            }
            if !(l.theta >= THETA_MIN && l.theta <= 1.0) {
                return Err(BanditError::Graph(format!(
                    "link {} -> {} has theta {} outside [{THETA_MIN}, 1]",
                    l.src, l.dst, l.theta
                )));
            }
            if !(l.base_delay_ms.is_finite() && l.base_delay_ms > 0.0) {
                return Err(BanditError::Graph(format!(
                    "link {} -> {} needs a positive delay",
                    l.src, l.dst
                )));
            }
            out[l.src as usize].push(i);
            inc[l.dst as usize].push(i);
        }
        for v in out.iter_mut() {
            v.sort_by_key(|&i| links[i].dst);
        }
        let g = Self {
            nodes,
            links,
            out,
            inc,
            source,
            sink,
        };
        let unit = vec![1.0; g.links.len()];
        if g.cost_to_sink(&unit, &[]).dist[source as usize].is_infinite() {
            return Err(BanditError::Graph("sink unreachable from source".into()));
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// Smallest per-attempt delay; the time slot of the delay model.
    pub fn slot_ms(&self) -> f64 {
        self.links
            .iter()
            .map(|l| l.base_delay_ms)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn link(&self, i: usize) -> &Link {
        &self.links[i]
    }

    /// Outgoing link indices of `v`, ascending by destination.
    pub fn out_links(&self, v: u32) -> &[usize] {
        &self.out[v as usize]
    }

    pub fn link_between(&self, a: u32, b: u32) -> Option<usize> {
        self.out[a as usize]
            .iter()
            .copied()
            .find(|&i| self.links[i].dst == b)
    }

    pub fn path_nodes(&self, path: &[usize]) -> Vec<u32> {
        let mut nodes = vec![self.source];
        nodes.extend(path.iter().map(|&i| self.links[i].dst));
        nodes
    }

    pub fn expected_delay(&self, path: &[usize]) -> f64 {
        path.iter().map(|&i| self.links[i].expected_delay()).sum()
    }

    /// Shortest distances to the sink under non-negative `weights`, never
    /// passing through `excluded` nodes (their distance stays infinite).
    pub fn cost_to_sink(&self, weights: &[f64], excluded: &[bool]) -> SinkDistances {
        let mut dist = vec![f64::INFINITY; self.nodes];
        let blocked = |v: usize| excluded.get(v).copied().unwrap_or(false);
        if blocked(self.sink as usize) {
            return SinkDistances { dist };
        }
        dist[self.sink as usize] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapItem(0.0, self.sink));
        while let Some(HeapItem(d, v)) = heap.pop() {
            if d > dist[v as usize] {
                continue;
            }
            for &i in &self.inc[v as usize] {
                let u = self.links[i].src as usize;
                if blocked(u) {
                    continue;
                }
                let nd = d + weights[i];
                if nd < dist[u] {
                    dist[u] = nd;
                    heap.push(HeapItem(nd, u as u32));
                }
            }
        }
        SinkDistances { dist }
    }

    /// Minimum-weight source-to-sink path; among equal totals the
    /// lexicographically smallest node sequence.
    pub fn shortest_path(&self, weights: &[f64]) -> Option<LinkPath> {
        let dist = self.cost_to_sink(weights, &[]).dist;
        if dist[self.source as usize].is_infinite() {
            return None;
        }
        let mut path = Vec::new();
        let mut v = self.source;
        while v != self.sink {
            let dv = dist[v as usize];
            let next = self.out[v as usize].iter().copied().find(|&i| {
                let via = weights[i] + dist[self.links[i].dst as usize];
                (via - dv).abs() <= 1e-12 * dv.max(1.0)
            })?;
            path.push(next);
            v = self.links[next].dst;
            if path.len() > self.nodes {
                return None;
            }
        }
        Some(path)
    }

    /// p*: shortest path under true expected link delays.
    pub fn optimal_path(&self) -> LinkPath {
        let w: Vec<f64> = self.links.iter().map(Link::expected_delay).collect();
        self.shortest_path(&w)
            .expect("validated graphs have a source-sink path")
    }

    /// Every loop-free source-to-sink path in lexicographic node order.
    pub fn enumerate_paths(&self, cap: usize) -> Result<Vec<LinkPath>, BanditError> {
        let mut paths = Vec::new();
        let mut on_path = vec![false; self.nodes];
        let mut stack = Vec::new();
        on_path[self.source as usize] = true;
        self.dfs(self.source, &mut on_path, &mut stack, &mut paths, cap)?;
        Ok(paths)
    }

    fn dfs(
        &self,
        v: u32,
        on_path: &mut [bool],
        stack: &mut Vec<usize>,
        paths: &mut Vec<LinkPath>,
        cap: usize,
    ) -> Result<(), BanditError> {
        if v == self.sink {
            if paths.len() == cap {
                return Err(BanditError::PathCap(cap));
            }
            paths.push(stack.clone());
            return Ok(());
        }
        for &i in &self.out[v as usize] {
            let w = self.links[i].dst;
            if on_path[w as usize] {
                continue;
            }
            on_path[w as usize] = true;
            stack.push(i);
            self.dfs(w, on_path, stack, paths, cap)?;
            stack.pop();
            on_path[w as usize] = false;
        }
        Ok(())
    }

    /// CSV `src,dst,theta,base_delay_ms` preceded by `#source=<id>,sink=<id>`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, BanditError> {
        let mut buf = BufReader::new(reader);
        let mut first = String::new();
        buf.read_line(&mut first)
            .map_err(|e| BanditError::Graph(e.to_string()))?;
        let header = first
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| BanditError::Graph("missing #source=..,sink=.. line".into()))?;
        let (mut source, mut sink) = (None, None);
        for part in header.split(',') {
            match part.trim().split_once('=') {
                Some(("source", v)) => source = v.trim().parse::<u32>().ok(),
                Some(("sink", v)) => sink = v.trim().parse::<u32>().ok(),
                _ => return Err(BanditError::Graph(format!("bad header field {part:?}"))),
            }
        }
        let (source, sink) = source
            .zip(sink)
            .ok_or_else(|| BanditError::Graph("header needs integer source and sink".into()))?;
        let mut links = Vec::new();
        for row in csv::Reader::from_reader(buf).deserialize() {
            let link: Link = row.map_err(|e| BanditError::Graph(e.to_string()))?;
            links.push(link);
        }
        let nodes = links
            .iter()
            .flat_map(|l| [l.src, l.dst])
            .chain([source, sink])
            .max()
            .map_or(0, |m| m as usize + 1);
        Self::new(nodes, links, source, sink)
    }

    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<(), BanditError> {
        let io = |e: std::io::Error| BanditError::Graph(e.to_string());
        writeln!(writer, "#source={},sink={}", self.source, self.sink).map_err(io)?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        for l in &self.links {
            w.serialize(l)
                .map_err(|e| BanditError::Graph(e.to_string()))?;
        }
        w.flush().map_err(io)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkDistances {
    pub dist: Vec<f64>,
}

#[derive(PartialEq)]
struct HeapItem(f64, u32);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    // Min-heap on distance, then node id.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Expected per-link delays drawn from [min, max]. Every attempt costs
/// `min` ms, so theta = min / expected.
fn draw_link(src: u32, dst: u32, delay: (f64, f64), rng: &mut SimRng) -> Link {
    let expected = rng.uniform(delay.0, delay.1);
    let theta = (delay.0 / expected).clamp(THETA_MIN, 1.0);
    Link {
        src,
        dst,
        theta,
        base_delay_ms: delay.0,
    }
}

fn check_delay(delay: (f64, f64)) -> Result<(), BanditError> {
    if !(delay.0 > 0.0 && delay.1 >= delay.0 && delay.1.is_finite()) {
        return Err(BanditError::Graph(format!("bad delay range {delay:?}")));
    }
    if delay.0 / delay.1 < THETA_MIN {
        return Err(BanditError::Graph(format!(
            "delay range {delay:?} implies theta below {THETA_MIN}"
        )));
    }
    Ok(())
}

/// Rows x cols for `nodes`, as square as the divisors allow.
pub fn grid_shape(nodes: usize) -> (usize, usize) {
    let mut rows = (nodes as f64).sqrt().floor() as usize;
    while rows > 1 && nodes % rows != 0 {
        rows -= 1;
    }
    (rows.max(1), nodes / rows.max(1))
}

/// Road-like grid: links only run right, down or diagonally down-right, so
/// every path makes progress and the graph is acyclic. Each non-sink node
/// first gets one random outgoing link (so every walk reaches the sink),
/// then the rest are drawn from the remaining candidates.
pub fn grid_road(
    nodes: usize,
    links: usize,
    delay: (f64, f64),
    rng: &mut SimRng,
) -> Result<NetGraph, BanditError> {
    check_delay(delay)?;
    let (rows, cols) = grid_shape(nodes);
    if nodes < 2 {
        return Err(BanditError::Graph("grid needs at least 2 nodes".into()));
    }
    let id = |r: usize, c: usize| (r * cols + c) as u32;
    let mut by_node: Vec<Vec<(u32, u32)>> = vec![Vec::new(); nodes];
    for r in 0..rows {
        for c in 0..cols {
            let v = id(r, c);
            if c + 1 < cols {
                by_node[v as usize].push((v, id(r, c + 1)));
            }
            if r + 1 < rows {
                by_node[v as usize].push((v, id(r + 1, c)));
            }
            if r + 1 < rows && c + 1 < cols {
                by_node[v as usize].push((v, id(r + 1, c + 1)));
            }
        }
    }
    let total: usize = by_node.iter().map(Vec::len).sum();
    if links < nodes - 1 || links > total {
        return Err(BanditError::Graph(format!(
            "a {rows}x{cols} grid road takes between {} and {total} links, not {links}",
            nodes - 1
        )));
    }
    let mut chosen = Vec::with_capacity(links);
    let mut rest = Vec::new();
    for cands in by_node.iter_mut().take(nodes - 1) {
        let pick = rng.below(cands.len());
        chosen.push(cands.swap_remove(pick));
        rest.append(cands);
    }
    rng.shuffle(&mut rest);
    chosen.extend(rest.into_iter().take(links - (nodes - 1)));
    chosen.sort();
    let links = chosen
        .into_iter()
        .map(|(a, b)| draw_link(a, b, delay, rng))
        .collect();
    NetGraph::new(nodes, links, 0, nodes as u32 - 1)
}

/// Bidirectional ring plus random chords; sink opposite the source.
pub fn ring_net(
    nodes: usize,
    links: usize,
    delay: (f64, f64),
    rng: &mut SimRng,
) -> Result<NetGraph, BanditError> {
    check_delay(delay)?;
    if nodes < 3 || links < 2 * nodes || links > nodes * (nodes - 1) {
        return Err(BanditError::Graph(format!(
            "a ring of {nodes} nodes takes between {} and {} links",
            2 * nodes,
            nodes * nodes.saturating_sub(1)
        )));
    }
    let n = nodes as u32;
    let mut set: BTreeSet<(u32, u32)> = (0..n)
        .flat_map(|i| [(i, (i + 1) % n), ((i + 1) % n, i)])
        .collect();
    while set.len() < links {
        let a = rng.below(nodes) as u32;
        let b = rng.below(nodes) as u32;
        if a != b {
            set.insert((a, b));
        }
    }
    let links = set
        .into_iter()
        .map(|(a, b)| draw_link(a, b, delay, rng))
        .collect();
    NetGraph::new(nodes, links, 0, n / 2)
}

/// A random source-to-sink Hamiltonian chain plus uniformly random links.
pub fn random_net(
    nodes: usize,
    links: usize,
    delay: (f64, f64),
    rng: &mut SimRng,
) -> Result<NetGraph, BanditError> {
    check_delay(delay)?;
    if nodes < 2 || links < nodes - 1 || links > nodes * (nodes - 1) {
        return Err(BanditError::Graph(format!(
            "{nodes} nodes take between {} and {} links",
            nodes.saturating_sub(1),
            nodes * nodes.saturating_sub(1)
        )));
    }
    let mut order: Vec<u32> = (1..nodes as u32 - 1).collect();
    rng.shuffle(&mut order);
    order.insert(0, 0);
    order.push(nodes as u32 - 1);
    let mut set: BTreeSet<(u32, u32)> = order.windows(2).map(|w| (w[0], w[1])).collect();
    while set.len() < links {
        let a = rng.below(nodes) as u32;
        let b = rng.below(nodes) as u32;
        if a != b {
            set.insert((a, b));
        }
    }
    let links = set
        .into_iter()
        .map(|(a, b)| draw_link(a, b, delay, rng))
        .collect();
    NetGraph::new(nodes, links, 0, nodes as u32 - 1)
}
