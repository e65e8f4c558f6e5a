use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::app::{BoundApp, OpKind};
use super::DataflowError;
use crate::overlay::{NodeId, Overlay, RoutePath};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceKey {
    pub op: String,
    pub index: u32,
}

impl fmt::Display for InstanceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.op, self.index)
    }
}

/// Operators hosted per node across every deployed application. Inner
/// operators only go to nodes with a free slot; pinned sources and sinks
/// always count.
#[derive(Debug, Clone)]
pub struct PlacementLoad {
    pub max_per_node: u32,
    hosted: HashMap<NodeId, u32>,
}

impl PlacementLoad {
    pub fn new(max_per_node: u32) -> Self {
        Self {
            max_per_node,
            hosted: HashMap::new(),
        }
    }

    pub fn hosted(&self, node: NodeId) -> u32 {
        self.hosted.get(&node).copied().unwrap_or(0)
    }

    pub fn has_slot(&self, node: NodeId) -> bool {
        self.hosted(node) < self.max_per_node
    }

    pub fn add(&mut self, node: NodeId) {
        *self.hosted.entry(node).or_insert(0) += 1;
    }

    pub fn remove(&mut self, node: NodeId) {
        if let Some(c) = self.hosted.get_mut(&node) {
            *c = c.saturating_sub(1);
        }
    }

    /// Count of nodes per hosted-operator count over `nodes`.
    pub fn histogram(&self, nodes: &[NodeId]) -> BTreeMap<u32, usize> {
        let mut h = BTreeMap::new();
        for n in nodes {
            *h.entry(self.hosted(*n)).or_insert(0) += 1;
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeploymentCost {
    pub messages: usize,
    pub hops: usize,
    pub time_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataflowGraph {
    pub app_id: String,
    pub key: u128,
    /// Node closest to the key, where all JOIN routes meet.
    pub rendezvous: NodeId,
    pub join_routes: BTreeMap<String, RoutePath>,
    pub sink_route: RoutePath,
    pub placement: BTreeMap<InstanceKey, NodeId>,
    pub shuffle_paths: BTreeMap<(String, String), Vec<NodeId>>,
    /// Route nodes in merge order, used for inner placement.
    pub route_nodes: Vec<NodeId>,
    /// One-way RTT sum of each JOIN route.
    join_rtt_ms: Vec<f64>,
}

/// Fixed per-deployment processing cost at the rendezvous.
pub const DEPLOY_BASE_MS: f64 = 1.0;

impl DataflowGraph {
    pub fn build(
        overlay: &Overlay,
        bound: &BoundApp,
        load: &mut PlacementLoad,
    ) -> Result<Self, DataflowError> {
        let app = &bound.app;
        let order = app.topo_order()?;
        for op in &app.operators {
            let binding = match op.kind {
                OpKind::Source => bound.sources.get(&op.id),
                OpKind::Sink => bound.sinks.get(&op.id),
                OpKind::Inner => continue,
            };
            let node = binding.ok_or_else(|| DataflowError::UnknownBinding(op.id.clone()))?;
            if !overlay.is_live(*node) {
                return Err(DataflowError::NotLive(*node));
            }
        }
        let primary_sink = app
            .operators
            .iter()
            .find(|o| o.kind == OpKind::Sink)
            .map(|o| bound.sinks[&o.id])
            .expect("validated app has a sink");
        let key = primary_sink.hashed();

        let mut join_routes = BTreeMap::new();
        let mut join_rtt_ms = Vec::new();
        let mut route_nodes: Vec<NodeId> = Vec::new();
        let push_unique = |nodes: &[NodeId], into: &mut Vec<NodeId>| {
            for n in nodes {
                if !into.contains(n) {
                    into.push(*n);
                }
            }
        };
        for op in app.operators.iter().filter(|o| o.kind == OpKind::Source) {
            let route = overlay.route(bound.sources[&op.id], key)?;
            join_rtt_ms.push(path_rtt(overlay, &route.nodes)?);
            push_unique(&route.nodes, &mut route_nodes);
            join_routes.insert(op.id.clone(), route);
        }
        let rendezvous = join_routes
            .values()
            .next()
            .expect("validated app has a source")
            .destination();
        let sink_route = overlay.route(rendezvous, primary_sink.0)?;
        push_unique(&sink_route.nodes, &mut route_nodes);

        let mut placement = BTreeMap::new();
        let mut cursor = 0usize;
        let inner_total: usize = app
            .operators
            .iter()
            .filter(|o| o.kind == OpKind::Inner)
            .map(|o| o.parallelism as usize)
            .sum();
        for &i in &order {
            let op = &app.operators[i];
            for index in 0..op.parallelism {
                let key = InstanceKey {
                    op: op.id.clone(),
                    index,
                };
                let node = match op.kind {
                    OpKind::Source => bound.sources[&op.id],
                    OpKind::Sink => bound.sinks[&op.id],
                    OpKind::Inner => match round_robin(&route_nodes, &mut cursor, load) {
                        Some(n) => n,
                        None => spill(overlay, &route_nodes, load)?.ok_or_else(|| {
                            DataflowError::Capacity {
                                app: app.app_id.clone(),
                                needed: inner_total,
                            }
                        })?,
                    },
                };
                load.add(node);
                placement.insert(key, node);
            }
        }

        let mut graph = Self {
            app_id: app.app_id.clone(),
            key,
            rendezvous,
            join_routes,
            sink_route,
            placement,
            shuffle_paths: BTreeMap::new(),
            route_nodes,
            join_rtt_ms,
        };
        for (a, b) in &app.edges {
            let path = graph.edge_route(overlay, a, b)?;
            graph.shuffle_paths.insert((a.clone(), b.clone()), path);
        }
        Ok(graph)
    }

    pub fn deployment_cost(&self) -> DeploymentCost {
        let slowest = self.join_rtt_ms.iter().copied().fold(0.0, f64::max);
        DeploymentCost {
            messages: self.join_routes.len(),
            hops: self.join_routes.values().map(RoutePath::hops).sum(),
            // JOIN out and acknowledgement back along the slowest route.
            time_ms: DEPLOY_BASE_MS + 2.0 * slowest,
        }
    }

    /// Recomputes the shuffle path of `edge` avoiding `avoid`, detouring
    /// through a leaf-set member of the upstream placement.
    pub fn reroute_edge(
        &self,
        overlay: &Overlay,
        edge: (&str, &str),
        avoid: NodeId,
    ) -> Result<Self, DataflowError> {
        let k = (edge.0.to_string(), edge.1.to_string());
        let path = self
            .shuffle_paths
            .get(&k)
            .ok_or_else(|| DataflowError::UnknownEdge(k.0.clone(), k.1.clone()))?;
        if !path.contains(&avoid) {
            return Ok(self.clone());
        }
        let unroutable = || DataflowError::Unroutable {
            from: k.0.clone(),
            to: k.1.clone(),
            avoid,
        };
        let (up, down) = (path[0], *path.last().expect("paths are non-empty"));
        if up == avoid || down == avoid {
            return Err(unroutable());
        }
        for alt in overlay.leaf_set(up)? {
            if alt == avoid || !overlay.is_live(alt) {
                continue;
            }
            let tail = overlay.route(alt, down.0)?;
            if tail.nodes.contains(&avoid) || tail.nodes.contains(&up) {
                continue;
            }
            let mut new_path = vec![up];
            new_path.extend(tail.nodes);
            let mut next = self.clone();
            next.shuffle_paths.insert(k, new_path);
            return Ok(next);
        }
        Err(unroutable())
    }

    /// Moves every instance hosted on a dead node to the nearest live leaf
    /// member of that node with a free slot (any live member if none has
    /// one) and recomputes shuffle paths that touched a dead node.
    pub fn handle_failures(
        &self,
        overlay: &Overlay,
        load: &mut PlacementLoad,
    ) -> Result<Self, DataflowError> {
        let mut next = self.clone();
        let mut moved: BTreeSet<String> = BTreeSet::new();
        for (inst, node) in next.placement.iter_mut() {
            if overlay.is_live(*node) {
                continue;
            }
            let leaf: Vec<NodeId> = overlay
                .leaf_set(*node)?
                .into_iter()
                .filter(|n| overlay.is_live(*n))
                .collect();
            let target = leaf
                .iter()
                .copied()
                .find(|n| load.has_slot(*n))
                .or_else(|| leaf.first().copied())
                .or_else(|| overlay.closest_node(node.0).ok())
                .ok_or(DataflowError::Overlay(
                    crate::overlay::OverlayError::EmptyRing,
                ))?;
            load.remove(*node);
            load.add(target);
            *node = target;
            moved.insert(inst.op.clone());
        }
        let stale: Vec<(String, String)> = next
            .shuffle_paths
            .iter()
            .filter(|((a, b), p)| {
                moved.contains(a) || moved.contains(b) || p.iter().any(|n| !overlay.is_live(*n))
            })
            .map(|(k, _)| k.clone())
            .collect();
        for (a, b) in stale {
            let path = next.edge_route(overlay, &a, &b)?;
            next.shuffle_paths.insert((a, b), path);
        }
        next.route_nodes.retain(|n| overlay.is_live(*n));
        Ok(next)
    }

    pub fn node_of(&self, op: &str, index: u32) -> Option<NodeId> {
        self.placement
            .get(&InstanceKey {
                op: op.to_string(),
                index,
            })
            .copied()
    }

    fn edge_route(
        &self,
        overlay: &Overlay,
        a: &str,
        b: &str,
    ) -> Result<Vec<NodeId>, DataflowError> {
        let from = self
            .node_of(a, 0)
            .ok_or_else(|| DataflowError::UnknownEdge(a.into(), b.into()))?;
        let to = self
            .node_of(b, 0)
            .ok_or_else(|| DataflowError::UnknownEdge(a.into(), b.into()))?;
        Ok(overlay.route(from, to.0)?.nodes)
    }
}

fn path_rtt(overlay: &Overlay, nodes: &[NodeId]) -> Result<f64, DataflowError> {
    let mut t = 0.0;
    for w in nodes.windows(2) {
        t += overlay.rtt(w[0], w[1])?;
    }
    Ok(t)
}

fn round_robin(nodes: &[NodeId], cursor: &mut usize, load: &PlacementLoad) -> Option<NodeId> {
    for _ in 0..nodes.len() {
        let n = nodes[*cursor % nodes.len()];
        *cursor += 1;
        if load.has_slot(n) {
            return Some(n);
        }
    }
    None
}

/// First leaf-set member of a route node (route order, nearest first) with
/// a free slot.
fn spill(
    overlay: &Overlay,
    route: &[NodeId],
    load: &PlacementLoad,
) -> Result<Option<NodeId>, DataflowError> {
    for r in route {
        for m in overlay.leaf_set(*r)? {
            if overlay.is_live(m) && load.has_slot(m) {
                return Ok(Some(m));
            }
        }
    }
    Ok(None)
}
