use serde::{Deserialize, Serialize};

use super::graph::{LinkPath, NetGraph, DEFAULT_PATH_CAP};
use super::kl::{omega, LinkStats, DEFAULT_U_TOLERANCE};
use super::BanditError;
use crate::simkernel::SimRng;

/// Geometric draws beyond this many attempts mark a pathological link.
pub const MAX_ATTEMPTS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HopLimit {
    Hops(u32),
    All,
}

impl HopLimit {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all" => Some(HopLimit::All),
            _ => s.parse::<u32>().ok().filter(|h| *h > 0).map(HopLimit::Hops),
        }
    }
}

impl std::fmt::Display for HopLimit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HopLimit::Hops(h) => write!(f, "{h}"),
            HopLimit::All => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanditConfig {
    /// Exploration factor, in (0, 1].
    pub c: f64,
    pub u_tolerance: f64,
    pub hop_limit: HopLimit,
    pub path_cap: usize,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            c: 0.2,
            u_tolerance: DEFAULT_U_TOLERANCE,
            hop_limit: HopLimit::All,
            path_cap: DEFAULT_PATH_CAP,
        }
    }
}

impl BanditConfig {
    pub fn validate(&self) -> Result<(), BanditError> {
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(BanditError::Config(format!(
                "C = {} outside (0, 1]",
                self.c
            )));
        }
        if !(self.u_tolerance > 0.0 && self.u_tolerance < 1.0) {
            return Err(BanditError::Config(format!(
                "u tolerance {} outside (0, 1)",
                self.u_tolerance
            )));
        }
        if self.path_cap == 0 {
            return Err(BanditError::Config("path cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolicyKind {
    /// Hop-by-hop argmin of base x omega plus the optimistic cost to go.
    Lookahead,
    /// Whole-path lower confidence bound with constant L.
    EndToEnd { l: f64 },
    /// Epsilon-greedy on empirical next-link delay.
    NextHop,
    /// Always the true best path.
    Optimal,
}

impl PolicyKind {
    /// End-to-end with L set to the longest loop-free path, in links.
    pub fn end_to_end_for(graph: &NetGraph, cap: usize) -> Result<Self, BanditError> {
        let longest = graph
            .enumerate_paths(cap)?
            .iter()
            .map(Vec::len)
            .max()
            .unwrap_or(1);
        Ok(PolicyKind::EndToEnd { l: longest as f64 })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Lookahead => "lookahead",
            PolicyKind::EndToEnd { .. } => "end-to-end",
            PolicyKind::NextHop => "next-hop",
            PolicyKind::Optimal => "optimal",
        }
    }

    pub fn parse(s: &str, l: f64) -> Option<Self> {
        match s {
            "lookahead" => Some(PolicyKind::Lookahead),
            "end-to-end" => Some(PolicyKind::EndToEnd { l }),
            "next-hop" => Some(PolicyKind::NextHop),
            "optimal" => Some(PolicyKind::Optimal),
            _ => None,
        }
    }
}

/// Learning state shared by every node of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsTable {
    pub links: Vec<LinkStats>,
    /// Summed observed delay per link, ms.
    pub delay_sum: Vec<f64>,
    /// Forwarding decisions taken at each node.
    pub node_visits: Vec<u64>,
    /// Time slot: 1 + every attempt made so far.
    pub tau: u64,
}

impl StatsTable {
    pub fn new(graph: &NetGraph) -> Self {
        Self {
            links: vec![LinkStats::default(); graph.links().len()],
            delay_sum: vec![0.0; graph.links().len()],
            node_visits: vec![0; graph.node_count()],
            tau: 1,
        }
    }

    /// Empirical mean delay of a link; unvisited links report 1, below any
    /// real delay.
    pub fn mean_delay(&self, link: usize) -> f64 {
        let n = self.links[link].s;
        if n == 0 {
            1.0
        } else {
            self.delay_sum[link] / n as f64
        }
    }
}

/// Per-link optimistic delay: base delay x omega.
pub fn link_costs(graph: &NetGraph, stats: &StatsTable, c: f64, tol: f64) -> Vec<f64> {
    graph
        .links()
        .iter()
        .zip(&stats.links)
        .map(|(l, s)| l.base_delay_ms * omega(*s, stats.tau, c, tol))
        .collect()
}

/// J(w) for every node: least total cost over loop-free paths to the sink
/// that avoid `excluded`. With a hop limit only the first h links of each
/// path count, and a truncated path must still be able to reach the sink.
pub fn cost_to_go(graph: &NetGraph, costs: &[f64], excluded: &[bool], limit: HopLimit) -> Vec<f64> {
    let full = graph.cost_to_sink(costs, excluded).dist;
    let HopLimit::Hops(h) = limit else {
        return full;
    };
    let n = graph.node_count();
    let mut out = vec![f64::INFINITY; n];
    let mut on_path = excluded.to_vec();
    on_path.resize(n, false);
    for (w, slot) in out.iter_mut().enumerate() {
        if on_path[w] {
            continue;
        }
        if w as u32 == graph.sink {
            *slot = 0.0;
            continue;
        }
        on_path[w] = true;
        *slot = truncated(graph, costs, w as u32, h, 0.0, &mut on_path);
        on_path[w] = false;
    }
    out
}

fn truncated(
    graph: &NetGraph,
    costs: &[f64],
    v: u32,
    hops_left: u32,
    acc: f64,
    on_path: &mut [bool],
) -> f64 {
    if v == graph.sink {
        return acc;
    }
    if hops_left == 0 {
        return if reaches(graph, v, on_path) {
            acc
        } else {
            f64::INFINITY
        };
    }
    let mut best = f64::INFINITY;
    for &i in graph.out_links(v) {
        let w = graph.link(i).dst;
        if on_path[w as usize] {
            continue;
        }
        on_path[w as usize] = true;
        best = best.min(truncated(
            graph,
            costs,
            w,
            hops_left - 1,
            acc + costs[i],
            on_path,
        ));
        on_path[w as usize] = false;
    }
    best
}

// `v` itself is marked on the path; the walk may start there.
fn reaches(graph: &NetGraph, v: u32, on_path: &[bool]) -> bool {
    let mut seen = on_path.to_vec();
    let mut stack = vec![v];
    while let Some(x) = stack.pop() {
        for &i in graph.out_links(x) {
            let w = graph.link(i).dst;
            if w == graph.sink {
                return true;
            }
            if !seen[w as usize] {
                seen[w as usize] = true;
                stack.push(w);
            }
        }
    }
    false
}

/// Outgoing links of `at` that avoid nodes this packet already visited,
/// or all of them if that leaves none.
fn candidates(graph: &NetGraph, at: u32, visited: &[bool]) -> Vec<usize> {
    let fresh: Vec<usize> = graph
        .out_links(at)
        .iter()
        .copied()
        .filter(|&i| !visited[graph.link(i).dst as usize])
        .collect();
    if fresh.is_empty() {
        graph.out_links(at).to_vec()
    } else {
        fresh
    }
}

/// Link out of `at` minimizing base x omega + J, ties to the lowest
/// next-hop id.
pub fn step_lookahead(
    graph: &NetGraph,
    stats: &StatsTable,
    at: u32,
    visited: &[bool],
    cfg: &BanditConfig,
) -> Result<usize, BanditError> {
    if at == graph.sink {
        return Err(BanditError::AtSink);
    }
    let costs = link_costs(graph, stats, cfg.c, cfg.u_tolerance);
    let pick = |j: &[f64], links: &[usize]| {
        let mut best: Option<(f64, usize)> = None;
        for &i in links {
            let c = costs[i] + j[graph.link(i).dst as usize];
            if c.is_finite() && best.is_none_or(|(b, _)| c < b) {
                best = Some((c, i));
            }
        }
        best.map(|(_, i)| i)
    };
    let j = cost_to_go(graph, &costs, visited, cfg.hop_limit);
    if let Some(i) = pick(&j, &candidates(graph, at, visited)) {
        return Ok(i);
    }
    // Every loop-free continuation is blocked; allow revisits.
    let j = cost_to_go(graph, &costs, &[], cfg.hop_limit);
    pick(&j, graph.out_links(at)).ok_or(BanditError::Stuck(at))
}

/// Epsilon-greedy: with probability 1 - 1/N(at) the lowest empirical
/// delay, otherwise uniform. Counts the visit before deciding.
pub fn step_nexthop(
    graph: &NetGraph,
    stats: &mut StatsTable,
    at: u32,
    visited: &[bool],
    rng: &mut SimRng,
) -> Result<usize, BanditError> {
    if at == graph.sink {
        return Err(BanditError::AtSink);
    }
    let cands = candidates(graph, at, visited);
    if cands.is_empty() {
        return Err(BanditError::Stuck(at));
    }
    stats.node_visits[at as usize] += 1;
    let threshold = 1.0 - 1.0 / stats.node_visits[at as usize] as f64;
    let eps = rng.unit();
    if eps < threshold {
        let mut best = cands[0];
        for &i in &cands[1..] {
            if stats.mean_delay(i) < stats.mean_delay(best) {
                best = i;
            }
        }
        Ok(best)
    } else {
        Ok(cands[rng.below(cands.len())])
    }
}

/// Visits and summed delay of one enumerated path.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PathStats {
    pub visits: u64,
    pub delay_sum: f64,
}

/// Lower confidence bound of a path's delay, measured in slots of
/// `slot_ms` so the confidence term is on the delay model's own scale.
pub fn lcb(path: &[usize], ps: PathStats, stats: &StatsTable, l: f64, slot_ms: f64) -> f64 {
    if ps.visits == 0 {
        return f64::NEG_INFINITY;
    }
    let link_visits: u64 = path.iter().map(|&i| stats.links[i].s).sum();
    let mean = ps.delay_sum / ps.visits as f64 / slot_ms;
    mean - ((l + 1.0) * (stats.tau as f64).ln() / link_visits as f64).sqrt()
}

/// Index of the path with the least LCB; unvisited paths first, ties to the
/// earliest (lexicographic) path.
pub fn plan_end_to_end(
    paths: &[LinkPath],
    path_stats: &[PathStats],
    stats: &StatsTable,
    l: f64,
    slot_ms: f64,
) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (k, p) in paths.iter().enumerate() {
        let v = lcb(p, path_stats[k], stats, l, slot_ms);
        if v < best_v {
            best_v = v;
            best = k;
            if v == f64::NEG_INFINITY {
                break;
            }
        }
    }
    best
}

/// Retries `link` until it succeeds; records the attempts and delay.
pub fn transmit(
    graph: &NetGraph,
    link: usize,
    stats: &mut StatsTable,
    rng: &mut SimRng,
) -> Result<u64, BanditError> {
    let l = graph.link(link);
    let attempts = geometric(l.theta, rng);
    if attempts > MAX_ATTEMPTS {
        return Err(BanditError::Pathological { link, attempts });
    }
    let s = &mut stats.links[link];
    s.s += 1;
    s.t += attempts;
    stats.delay_sum[link] += attempts as f64 * l.base_delay_ms;
    stats.tau += attempts;
    Ok(attempts)
}

/// Attempts up to and including the first success, by inversion.
pub fn geometric(theta: f64, rng: &mut SimRng) -> u64 {
    if theta >= 1.0 {
        return 1;
    }
    // unit() is in [0, 1); 1 - unit() is in (0, 1].
    let u = 1.0 - rng.unit();
    let k = (u.ln() / (1.0 - theta).ln()).ceil();
    if k < 1.0 {
        1
    } else if k >= u64::MAX as f64 {
        u64::MAX
    } else {
        k as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketOutcome {
    pub path: LinkPath,
    pub delay_ms: f64,
    pub attempts: u64,
}

/// One policy's learner over one graph.
#[derive(Debug, Clone)]
pub struct Router<'g> {
    graph: &'g NetGraph,
    policy: PolicyKind,
    cfg: BanditConfig,
    stats: StatsTable,
    paths: Vec<LinkPath>,
    path_stats: Vec<PathStats>,
    optimal: LinkPath,
}

impl<'g> Router<'g> {
    pub fn new(
        graph: &'g NetGraph,
        policy: PolicyKind,
        cfg: BanditConfig,
    ) -> Result<Self, BanditError> {
        cfg.validate()?;
        let paths = match policy {
            PolicyKind::EndToEnd { l } => {
                if !(l > 0.0 && l.is_finite()) {
                    return Err(BanditError::Config(format!("L = {l} must be positive")));
                }
                graph.enumerate_paths(cfg.path_cap)?
            }
            _ => Vec::new(),
        };
        Ok(Self {
            graph,
            policy,
            cfg,
            stats: StatsTable::new(graph),
            path_stats: vec![PathStats::default(); paths.len()],
            paths,
            optimal: graph.optimal_path(),
        })
    }

    pub fn stats(&self) -> &StatsTable {
        &self.stats
    }

    pub fn route_packet(&mut self, rng: &mut SimRng) -> Result<PacketOutcome, BanditError> {
        let path = match self.policy {
            PolicyKind::Optimal => self.optimal.clone(),
            PolicyKind::EndToEnd { l } => {
                let k = plan_end_to_end(
                    &self.paths,
                    &self.path_stats,
                    &self.stats,
                    l,
                    self.graph.slot_ms(),
                );
                self.paths[k].clone()
            }
            PolicyKind::Lookahead | PolicyKind::NextHop => return self.hop_by_hop(rng),
        };
        let mut delay = 0.0;
        let mut attempts = 0;
        for &i in &path {
            let a = transmit(self.graph, i, &mut self.stats, rng)?;
            attempts += a;
            delay += a as f64 * self.graph.link(i).base_delay_ms;
        }
        if let PolicyKind::EndToEnd { .. } = self.policy {
            let k = self
                .paths
                .iter()
                .position(|p| *p == path)
                .expect("planned from this list");
            self.path_stats[k].visits += 1;
            self.path_stats[k].delay_sum += delay;
        }
        Ok(PacketOutcome {
            path,
            delay_ms: delay,
            attempts,
        })
    }

    fn hop_by_hop(&mut self, rng: &mut SimRng) -> Result<PacketOutcome, BanditError> {
        let g = self.graph;
        let mut visited = vec![false; g.node_count()];
        let mut at = g.source;
        visited[at as usize] = true;
        let mut path = Vec::new();
        let mut delay = 0.0;
        let mut attempts = 0;
        while at != g.sink {
            if path.len() > 4 * g.node_count() {
                return Err(BanditError::PacketLost(path.len()));
            }
            let link = match self.policy {
                PolicyKind::Lookahead => step_lookahead(g, &self.stats, at, &visited, &self.cfg)?,
                _ => step_nexthop(g, &mut self.stats, at, &visited, rng)?,
            };
            let a = transmit(g, link, &mut self.stats, rng)?;
            attempts += a;
            delay += a as f64 * g.link(link).base_delay_ms;
            path.push(link);
            at = g.link(link).dst;
            visited[at as usize] = true;
        }
        Ok(PacketOutcome {
            path,
            delay_ms: delay,
            attempts,
        })
    }
}
