use std::collections::BTreeMap;

use super::config::{ExperimentKind, ScenarioConfig, TopologyKind};
use super::table::{Cell, SummarySpec};
use super::HarnessError;
use crate::autoscale::{
    default_pressure, read_pressure_csv, run_scaling_scenario, InstanceCapacity, ScalePolicy,
    ScalingParams,
};
use crate::banditnet::{
    grid_road, random_net, ring_net, run_regret, BanditConfig, BanditError, HopLimit, NetGraph,
    PolicyKind, DEFAULT_PATH_CAP,
};
use crate::dataflow::{synthetic_app, DataflowGraph, PlacementLoad, SchedulerRegistry};
use crate::overlay::{EdgeTopology, Overlay};
use crate::recovery::{model_time_ms, recover, Checkpointer, ErasureConfig, LinkRate};
use crate::simkernel::SimRng;

type Rows = Vec<Vec<Cell>>;

fn runtime(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime(e.to_string())
}

fn invariant(msg: String) -> HarnessError {
    HarnessError::Invariant(msg)
}

fn build_overlay(cfg: &ScenarioConfig, nodes: usize, seed: u64) -> Result<Overlay, HarnessError> {
    let topo = match &cfg.overlay.topology_file {
        Some(path) => {
            let f = std::fs::File::open(path)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
            EdgeTopology::read_csv(f).map_err(|e| HarnessError::Config {
                field: Some("overlay.topology_file".into()),
                message: e.to_string(),
            })?
        }
        None => EdgeTopology::generate(
            nodes,
            cfg.overlay.zones,
            &mut SimRng::fork(seed, "topology"),
        ),
    };
    Overlay::build(&topo, cfg.overlay_config()?).map_err(runtime)
}

/// Work for one run seed. Every job returns its rows already in scenario
/// order, so concatenating jobs in seed order gives the output order.
pub(super) fn plan(cfg: &ScenarioConfig) -> Result<Plan, HarnessError> {
    let bandit = matches!(
        cfg.experiment,
        ExperimentKind::Regret | ExperimentKind::Convergence | ExperimentKind::SweepC
    );
    let networks = if bandit {
        shared_networks(cfg)?
    } else {
        Vec::new()
    };
    Ok(Plan {
        cfg: cfg.clone(),
        networks,
    })
}

pub(super) struct Plan {
    cfg: ScenarioConfig,
    /// One entry per network scenario; `None` graphs are drawn per seed.
    networks: Vec<NetworkSpec>,
}

struct NetworkSpec {
    label: String,
    nodes: usize,
    links: usize,
    delay: (f64, f64),
    graph: Option<NetGraph>,
}

fn bandit_error(field: &str, e: BanditError) -> HarnessError {
    match e {
        BanditError::Graph(_) | BanditError::Config(_) => HarnessError::Config {
            field: Some(field.into()),
            message: e.to_string(),
        },
        other => runtime(other),
    }
}

/// Generator dispatch; every network draws from its own labelled stream.
pub fn generate_network(
    kind: TopologyKind,
    nodes: usize,
    links: usize,
    delay: (f64, f64),
    seed: u64,
    label: &str,
) -> Result<NetGraph, BanditError> {
    let mut rng = SimRng::fork(seed, label);
    match kind {
        TopologyKind::GridRoad => grid_road(nodes, links, delay, &mut rng),
        TopologyKind::Ring => ring_net(nodes, links, delay, &mut rng),
        TopologyKind::Random => random_net(nodes, links, delay, &mut rng),
    }
}

/// Label of a generated network's random stream.
pub fn network_label(nodes: usize, links: usize, delay: (f64, f64)) -> String {
    format!("topology-n{nodes}-l{links}-d{}-{}", delay.0, delay.1)
}

fn shared_networks(cfg: &ScenarioConfig) -> Result<Vec<NetworkSpec>, HarnessError> {
    let t = &cfg.topology;
    if let Some(path) = &t.file {
        let f = std::fs::File::open(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let g = NetGraph::read_csv(f).map_err(|e| bandit_error("topology.file", e))?;
        let delay = (g.slot_ms(), g.slot_ms());
        let spec = NetworkSpec {
            label: "file".into(),
            nodes: g.node_count(),
            links: g.links().len(),
            delay,
            graph: Some(g),
        };
        return Ok(vec![spec]);
    }
    let delays: Vec<(f64, f64)> = if cfg.experiment == ExperimentKind::SweepC {
        cfg.bandit
            .delay_ranges
            .iter()
            .map(|r| (r[0], r[1]))
            .collect()
    } else {
        vec![(t.delay_min, t.delay_max)]
    };
    let topo_seed = t.seed.unwrap_or(cfg.seed);
    let mut out = Vec::new();
    for &[nodes, links] in &t.sizes {
        for &delay in &delays {
            let label = network_label(nodes, links, delay);
            // Generated up front even when regenerating, so a bad shape is
            // a config error before any run starts.
            let g = generate_network(t.kind, nodes, links, delay, topo_seed, &label)
                .map_err(|e| bandit_error("topology.sizes", e))?;
            out.push(NetworkSpec {
                label,
                nodes,
                links,
                delay,
                graph: (!t.regenerate).then_some(g),
            });
        }
    }
    Ok(out)
}

impl Plan {
    pub(super) fn network_count(&self) -> usize {
        self.networks.len()
    }

    pub(super) fn run_seed(&self, seed: u64) -> Result<Rows, HarnessError> {
        let cfg = &self.cfg;
        match cfg.experiment {
            ExperimentKind::Placement => placement(cfg, seed),
            ExperimentKind::Schedulers => schedulers(cfg, seed),
            ExperimentKind::Deployment => deployment(cfg, seed),
            ExperimentKind::Scaling => scaling(cfg, seed),
            ExperimentKind::Recovery => recovery(cfg, seed),
            ExperimentKind::Regret => self.regret(seed),
            ExperimentKind::Convergence => self.convergence(seed),
            ExperimentKind::SweepC => self.sweep_c(seed),
        }
    }

    pub(super) fn header(&self) -> (Vec<&'static str>, SummarySpec) {
        let cfg = &self.cfg;
        let mut h = vec!["seed", "scenario_id"];
        let spec = |group: &[&'static str], metrics: &[&'static str]| SummarySpec {
            group_by: group.to_vec(),
            metrics: metrics.to_vec(),
            filter: None,
        };
        let s = match cfg.experiment {
            ExperimentKind::Placement => {
                h.extend(["apps", "ops_per_node", "count", "fraction"]);
                spec(&["scenario_id", "ops_per_node"], &["count", "fraction"])
            }
            ExperimentKind::Schedulers => {
                h.extend([
                    "apps",
                    "zone",
                    "apps_in_zone",
                    "schedulers",
                    "expected_schedulers",
                    "mean_lookup_hops",
                    "max_lookup_hops",
                ]);
                spec(
                    &["scenario_id"],
                    &["schedulers", "expected_schedulers", "mean_lookup_hops"],
                )
            }
            ExperimentKind::Deployment => {
                h.extend(["app", "operators", "messages", "hops", "time_ms"]);
                spec(&["scenario_id"], &["messages", "hops", "time_ms"])
            }
            ExperimentKind::Scaling => {
                h.extend([
                    "time_s",
                    "op_id",
                    "instances",
                    "hosts",
                    "health",
                    "link_utilization",
                    "action",
                    "reason",
                    "target",
                ]);
                spec(
                    &["scenario_id", "op_id"],
                    &["instances", "health", "link_utilization"],
                )
            }
            ExperimentKind::Recovery => {
                h.extend([
                    "state_mb",
                    "m",
                    "k",
                    "model_time",
                    "sim_time_ms",
                    "single_source_ms",
                    "providers",
                    "model_ratio",
                ]);
                spec(
                    &["scenario_id", "m", "k"],
                    &["model_time", "sim_time_ms", "single_source_ms"],
                )
            }
            ExperimentKind::Regret => {
                h.extend(["policy", "packet_k", "expected_regret", "realized_delay_ms"]);
                SummarySpec {
                    group_by: vec!["scenario_id", "policy"],
                    metrics: vec!["expected_regret"],
                    filter: Some(("packet_k", Cell::from(cfg.bandit.k))),
                }
            }
            ExperimentKind::Convergence => {
                h.extend([
                    "policy",
                    "first_optimal_trial",
                    "modal_path_delay_ms",
                    "optimal_delay_ms",
                    "modal_ratio",
                    "expected_regret",
                ]);
                spec(
                    &["scenario_id", "policy"],
                    &["first_optimal_trial", "modal_ratio", "expected_regret"],
                )
            }
            ExperimentKind::SweepC => {
                h.extend([
                    "delay_min",
                    "delay_max",
                    "c",
                    "policy",
                    "expected_regret",
                    "first_optimal_trial",
                ]);
                spec(
                    &["scenario_id", "policy"],
                    &["expected_regret", "first_optimal_trial"],
                )
            }
        };
        (h, s)
    }

    fn graph_for(&self, net: &NetworkSpec, seed: u64) -> Result<NetGraph, HarnessError> {
        match &net.graph {
            Some(g) => Ok(g.clone()),
            None => generate_network(
                self.cfg.topology.kind,
                net.nodes,
                net.links,
                net.delay,
                seed,
                &net.label,
            )
            .map_err(runtime),
        }
    }

    fn policy(&self, name: &str, graph: &NetGraph) -> Result<PolicyKind, HarnessError> {
        let l = self.cfg.bandit.l;
        match (name, l) {
            ("end-to-end", None) => {
                PolicyKind::end_to_end_for(graph, DEFAULT_PATH_CAP).map_err(runtime)
            }
            _ => PolicyKind::parse(name, l.unwrap_or(1.0))
                .ok_or_else(|| runtime(format!("unknown policy {name}"))),
        }
    }

    fn bandit_config(&self, c: f64, hop_limit: HopLimit) -> Result<BanditConfig, HarnessError> {
        let b = BanditConfig {
            c,
            hop_limit,
            ..BanditConfig::default()
        };
        b.validate().map_err(|e| bandit_error("bandit.c", e))?;
        Ok(b)
    }

    fn scenario(&self, suffix: &str) -> Cell {
        Cell::Text(format!("{}-{suffix}", self.cfg.scenario_prefix()))
    }

    fn regret(&self, seed: u64) -> Result<Rows, HarnessError> {
        let b = &self.cfg.bandit;
        let mut rows = Vec::new();
        for net in &self.networks {
            let graph = self.graph_for(net, seed)?;
            for hop in self.cfg.hop_limits()? {
                let id = self.scenario(&format!("n{}-l{}-h{hop}", net.nodes, net.links));
                let bc = self.bandit_config(b.c, hop)?;
                for name in self.cfg.policies()? {
                    // Only the cost-to-go router reads the hop limit.
                    if hop != HopLimit::All && name != "lookahead" {
                        continue;
                    }
                    let policy = self.policy(&name, &graph)?;
                    let ledger = run_regret(&graph, policy, bc, b.k, seed).map_err(runtime)?;
                    for k in 1..=b.k {
                        if k % b.record_every != 0 && k != b.k {
                            continue;
                        }
                        rows.push(vec![
                            seed.into(),
                            id.clone(),
                            policy.name().into(),
                            k.into(),
                            ledger.expected[k - 1].into(),
                            ledger.delays[k - 1].into(),
                        ]);
                    }
                }
            }
        }
        Ok(rows)
    }

    fn convergence(&self, seed: u64) -> Result<Rows, HarnessError> {
        let b = &self.cfg.bandit;
        let bc = self.bandit_config(b.c, HopLimit::All)?;
        let mut rows = Vec::new();
        for net in &self.networks {
            let graph = self.graph_for(net, seed)?;
            let id = self.scenario(&format!("n{}-l{}", net.nodes, net.links));
            for name in self.cfg.policies()? {
                let policy = self.policy(&name, &graph)?;
                let ledger = run_regret(&graph, policy, bc, b.k, seed).map_err(runtime)?;
                let modal = ledger
                    .modal_path(modal_window(b.k))
                    .map(|p| graph.expected_delay(p))
                    .ok_or_else(|| invariant("run produced no packets".into()))?;
                rows.push(vec![
                    seed.into(),
                    id.clone(),
                    policy.name().into(),
                    ledger.first_optimal_trial.into(),
                    modal.into(),
                    ledger.optimal_delay.into(),
                    (modal / ledger.optimal_delay).into(),
                    ledger.final_expected().into(),
                ]);
            }
        }
        Ok(rows)
    }

    fn sweep_c(&self, seed: u64) -> Result<Rows, HarnessError> {
        let b = &self.cfg.bandit;
        let mut rows = Vec::new();
        for net in &self.networks {
            let graph = self.graph_for(net, seed)?;
            for &c in &b.c_values {
                let id = self.scenario(&format!(
                    "n{}-l{}-d{}-{}-c{c}",
                    net.nodes, net.links, net.delay.0, net.delay.1
                ));
                let bc = self.bandit_config(c, HopLimit::All)?;
                let policy = PolicyKind::Lookahead;
                let ledger = run_regret(&graph, policy, bc, b.k, seed).map_err(runtime)?;
                rows.push(vec![
                    seed.into(),
                    id,
                    net.delay.0.into(),
                    net.delay.1.into(),
                    c.into(),
                    policy.name().into(),
                    ledger.final_expected().into(),
                    ledger.first_optimal_trial.into(),
                ]);
            }
        }
        Ok(rows)
    }
}

/// Converged behaviour is read over the last tenth of the packets.
pub fn modal_window(k: usize) -> usize {
    (k / 10).max(1)
}

fn draw_ops(rng: &mut SimRng, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

fn placement(cfg: &ScenarioConfig, seed: u64) -> Result<Rows, HarnessError> {
    let p = &cfg.placement;
    let overlay = build_overlay(cfg, p.nodes, seed)?;
    let ids = overlay.live_ids();
    let mut rows = Vec::new();
    for &apps in &p.apps {
        let mut rng = SimRng::fork(seed, &format!("placement-{apps}"));
        let mut load = PlacementLoad::new(p.max_ops_per_node);
        let mut placed = 0usize;
        for i in 0..apps {
            let ops = draw_ops(&mut rng, p.ops_min, p.ops_max);
            let bound = synthetic_app(&format!("app{i}"), ops, &ids, &mut rng);
            placed += bound.app.instance_count();
            DataflowGraph::build(&overlay, &bound, &mut load).map_err(runtime)?;
        }
        let hist = load.histogram(&ids);
        let mass: usize = hist.iter().map(|(k, c)| *k as usize * c).sum();
        if mass != placed {
            return Err(invariant(format!(
                "placement histogram holds {mass} operators but {placed} were placed"
            )));
        }
        for (ops, count) in hist {
            rows.push(vec![
                seed.into(),
                Cell::Text(format!("{}-apps{apps}", cfg.scenario_prefix())),
                apps.into(),
                ops.into(),
                count.into(),
                (count as f64 / ids.len() as f64).into(),
            ]);
        }
    }
    Ok(rows)
}

fn schedulers(cfg: &ScenarioConfig, seed: u64) -> Result<Rows, HarnessError> {
    let s = &cfg.schedulers;
    let overlay = build_overlay(cfg, s.nodes, seed)?;
    let ids = overlay.live_ids();
    let mut rows = Vec::new();
    for &apps in &s.apps {
        let mut rng = SimRng::fork(seed, &format!("schedulers-{apps}"));
        let mut reg = SchedulerRegistry::new(s.apps_per_scheduler);
        // zone -> (apps, hop sum, max hops)
        let mut zones: BTreeMap<u32, (usize, usize, usize)> = BTreeMap::new();
        for i in 0..apps {
            let origin = ids[rng.below(ids.len())];
            let zone = overlay.spec(origin).map_err(runtime)?.zone;
            let a = reg
                .find_or_elect(&overlay, &format!("app{i}"), origin)
                .map_err(runtime)?;
            let z = zones.entry(zone).or_default();
            z.0 += 1;
            z.1 += a.hops;
            z.2 = z.2.max(a.hops);
        }
        for (zone, (n, hop_sum, max_hops)) in zones {
            rows.push(vec![
                seed.into(),
                Cell::Text(format!("{}-apps{apps}", cfg.scenario_prefix())),
                apps.into(),
                zone.into(),
                n.into(),
                reg.schedulers_in(zone).len().into(),
                n.div_ceil(s.apps_per_scheduler).into(),
                (hop_sum as f64 / n as f64).into(),
                max_hops.into(),
            ]);
        }
    }
    Ok(rows)
}

fn deployment(cfg: &ScenarioConfig, seed: u64) -> Result<Rows, HarnessError> {
    let d = &cfg.deployment;
    let overlay = build_overlay(cfg, d.nodes, seed)?;
    let ids = overlay.live_ids();
    let mut rng = SimRng::fork(seed, "deployment");
    let mut load = PlacementLoad::new(crate::dataflow::DEFAULT_MAX_OPS_PER_NODE);
    let id = Cell::Text(format!("{}-apps{}", cfg.scenario_prefix(), d.apps));
    let mut rows = Vec::new();
    for i in 0..d.apps {
        let ops = draw_ops(&mut rng, d.ops_min, d.ops_max);
        let bound = synthetic_app(&format!("app{i}"), ops, &ids, &mut rng);
        let cost = DataflowGraph::build(&overlay, &bound, &mut load)
            .map_err(runtime)?
            .deployment_cost();
        rows.push(vec![
            seed.into(),
            id.clone(),
            i.into(),
            bound.app.instance_count().into(),
            cost.messages.into(),
            cost.hops.into(),
            cost.time_ms.into(),
        ]);
    }
    Ok(rows)
}

fn scaling(cfg: &ScenarioConfig, seed: u64) -> Result<Rows, HarnessError> {
    let s = &cfg.scaling;
    let capacity = InstanceCapacity { r: s.r, q: s.q };
    let schedule = match &s.pressure_file {
        Some(path) => {
            let f = std::fs::File::open(path)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
            read_pressure_csv(f).map_err(|e| HarnessError::Config {
                field: Some("scaling.pressure_file".into()),
                message: e.to_string(),
            })?
        }
        None => default_pressure(s.base_rate, s.steps, capacity),
    };
    let params = ScalingParams {
        policy: ScalePolicy {
            alpha: s.alpha,
            capacity,
            ..ScalePolicy::default()
        },
        eval_interval_ms: s.eval_interval_s * 1000,
        duration_ms: s.duration_s * 1000,
        link_capacity: s.link_capacity,
        initial_instances: s.initial_instances,
        stateful_ops: s.stateful_ops.clone(),
        nodes: s.nodes,
        ..ScalingParams::default()
    };
    let trace = run_scaling_scenario(&schedule, &params, &mut SimRng::fork(seed, "scaling"))
        .map_err(runtime)?;
    let id = Cell::Text(cfg.scenario_prefix());
    Ok(trace
        .into_iter()
        .map(|r| {
            vec![
                seed.into(),
                id.clone(),
                r.time_s.into(),
                r.op_id.into(),
                r.instances.into(),
                r.hosts.into(),
                r.health.into(),
                r.link_utilization.into(),
                r.action.into(),
                r.reason.into(),
                r.target.into(),
            ]
        })
        .collect())
}

fn random_state(len: usize, rng: &mut SimRng) -> Vec<u8> {
    let mut state = Vec::with_capacity(len + 8);
    while state.len() < len {
        state.extend_from_slice(&rng.next_u64().to_le_bytes());
    }
    state.truncate(len);
    state
}

/// m / (m + k - 1): recovery time in units of one fragment upload.
pub fn model_ratio(m: usize, k: usize) -> f64 {
    m as f64 / (m + k - 1) as f64
}

fn recovery(cfg: &ScenarioConfig, seed: u64) -> Result<Rows, HarnessError> {
    let e = &cfg.erasure;
    let rate = LinkRate { mbps: e.rate_mbps };
    let live = build_overlay(cfg, e.nodes, seed)?;
    let ids = live.live_ids();
    let mut rng = SimRng::fork(seed, "recovery");
    let owner = ids[rng.below(ids.len())];
    let mut failed = live.clone();
    failed.fail_nodes(&[owner]).map_err(runtime)?;

    let grid = e.grid()?;
    check_model_grid(&grid)?;
    let mut rows = Vec::new();
    for &mb in &e.state_mb {
        let len = (mb * (1u64 << 20) as f64).round() as usize;
        let state = random_state(len.max(1), &mut rng);
        let id = Cell::Text(format!("{}-s{mb}", cfg.scenario_prefix()));
        for &(m, k) in &grid {
            let ec = ErasureConfig::new(m, k).map_err(runtime)?;
            let mut cp = Checkpointer::new(
                &live,
                "op#0",
                owner,
                ec,
                crate::recovery::DEFAULT_CHECKPOINT_INTERVAL_MS,
            )
            .map_err(runtime)?;
            let snap = cp.take(0, &state).map_err(runtime)?.clone();
            let got = recover(&failed, &snap, owner, rate).map_err(runtime)?;
            if got.state != state {
                return Err(invariant(format!("m={m} k={k}: recovered state differs")));
            }
            let r = got.report;
            let model = model_time_ms(ec, state.len(), rate);
            if (r.sim_time_ms - model).abs() > 0.10 * model {
                return Err(invariant(format!(
                    "m={m} k={k}: simulated {} ms is not within 10% of the model's {model} ms",
                    r.sim_time_ms
                )));
            }
            if m >= 2 && r.single_source_ms.is_some_and(|s| r.sim_time_ms >= s) {
                return Err(invariant(format!(
                    "m={m} k={k}: parallel recovery no faster than one source"
                )));
            }
            rows.push(vec![
                seed.into(),
                id.clone(),
                mb.into(),
                m.into(),
                k.into(),
                model.into(),
                r.sim_time_ms.into(),
                r.single_source_ms.into(),
                r.providers.into(),
                model_ratio(m, k).into(),
            ]);
        }
    }
    Ok(rows)
}

/// With B fixed the model rises with m (flat when k = 1, where it is B for
/// every m) and falls with k.
fn check_model_grid(grid: &[(usize, usize)]) -> Result<(), HarnessError> {
    let mut ms: Vec<usize> = grid.iter().map(|g| g.0).collect();
    let mut ks: Vec<usize> = grid.iter().map(|g| g.1).collect();
    ms.sort_unstable();
    ms.dedup();
    ks.sort_unstable();
    ks.dedup();
    for &k in &ks {
        for w in ms.windows(2) {
            let (a, b) = (model_ratio(w[0], k), model_ratio(w[1], k));
            let ok = if k == 1 { a == b } else { b > a };
            if !ok {
                return Err(invariant(format!(
                    "model not increasing in m at k={k}, m={}..{}",
                    w[0], w[1]
                )));
            }
        }
    }
    for &m in &ms {
        for w in ks.windows(2) {
            if model_ratio(m, w[1]) >= model_ratio(m, w[0]) {
                return Err(invariant(format!("model not decreasing in k at m={m}")));
            }
        }
    }
    Ok(())
}
