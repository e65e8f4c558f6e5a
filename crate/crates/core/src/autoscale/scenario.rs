use std::collections::{BTreeMap, VecDeque};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{decide, Action, InstanceCapacity, OpContext, OpMetrics, ScaleError, ScalePolicy};
use crate::overlay::{EdgeTopology, NodeId, Overlay, OverlayConfig};
use crate::simkernel::{SimRng, Simulation, TimeMs};

/// One pressure-schedule row; the workload holds for `op_id` from `time_s`
/// until the op's next row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureRow {
    pub time_s: f64,
    pub op_id: String,
    pub input_rate: f64,
    pub queue_size: f64,
}

pub fn read_pressure_csv<R: Read>(reader: R) -> Result<Vec<PressureRow>, ScaleError> {
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: PressureRow = row.map_err(|e| ScaleError::InvalidInput(e.to_string()))?;
        if ![row.time_s, row.input_rate, row.queue_size]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
        {
            return Err(ScaleError::InvalidInput(format!(
                "row for {:?} has a negative value",
                row.op_id
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Three-stage pipeline whose source rate starts at `base_rate` and rises
/// by `base_rate` every 30 s for `steps` steps (ten more instances' worth
/// per step at r = 30). Downstream stages see 80% and 60% of it. Queue
/// sizes match the rate so that f = x r / R.
pub fn default_pressure(base_rate: f64, steps: u32, cap: InstanceCapacity) -> Vec<PressureRow> {
    let stages = [("stage0", 1.0), ("stage1", 0.8), ("stage2", 0.6)];
    let mut rows = Vec::new();
    for step in 0..=steps {
        for (op, share) in stages {
            let rate = base_rate * (step + 1) as f64 * share;
            rows.push(PressureRow {
                time_s: 30.0 * step as f64,
                op_id: op.to_string(),
                input_rate: rate,
                queue_size: rate * cap.q / cap.r,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingParams {
    pub policy: ScalePolicy,
    pub eval_interval_ms: TimeMs,
    pub duration_ms: TimeMs,
    /// Tuples/s one node uplink carries when idle.
    pub link_capacity: f64,
    pub initial_instances: u32,
    pub stateful_ops: Vec<String>,
    pub nodes: usize,
    /// Background uplink load is drawn from [0, max_background).
    pub max_background: f64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self {
            policy: ScalePolicy::default(),
            eval_interval_ms: 5_000,
            duration_ms: 240_000,
            link_capacity: 1_000.0,
            initial_instances: 10,
            stateful_ops: vec!["stage1".into()],
            nodes: 60,
            max_background: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub time_s: f64,
    pub op_id: String,
    /// Instance count after the action.
    pub instances: u32,
    pub hosts: usize,
    /// Health at the count in force when the evaluation ran.
    pub health: Option<f64>,
    pub link_utilization: f64,
    pub action: &'static str,
    pub reason: &'static str,
    pub target: Option<String>,
}

struct OpState {
    id: String,
    stateful: bool,
    instances: u32,
    prev_instances: Option<f64>,
    hosts: Vec<NodeId>,
    samples: VecDeque<f64>,
}

/// Periodic evaluation of every scheduled operator. Bandwidth is modeled per
/// host uplink: available = capacity x (1 - background) summed over hosts.
pub fn run_scaling_scenario(
    schedule: &[PressureRow],
    params: &ScalingParams,
    rng: &mut SimRng,
) -> Result<Vec<TraceRow>, ScaleError> {
    if params.eval_interval_ms == 0 || params.initial_instances == 0 || params.nodes < 2 {
        return Err(ScaleError::InvalidInput(
            "eval interval, initial instances must be positive and nodes >= 2".into(),
        ));
    }
    let topo = EdgeTopology::generate(params.nodes, 4, rng);
    let overlay = Overlay::build(&topo, OverlayConfig::default())
        .map_err(|e| ScaleError::InvalidInput(e.to_string()))?;
    let ids = overlay.live_ids();
    let background: BTreeMap<NodeId, f64> = ids
        .iter()
        .map(|&n| (n, rng.uniform(0.0, params.max_background)))
        .collect();

    let mut by_op: BTreeMap<&str, Vec<&PressureRow>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for row in schedule {
        if !by_op.contains_key(row.op_id.as_str()) {
            order.push(&row.op_id);
        }
        by_op.entry(&row.op_id).or_default().push(row);
    }
    for rows in by_op.values_mut() {
        rows.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    }
    let mut ops: Vec<OpState> = order
        .iter()
        .enumerate()
        .map(|(i, id)| OpState {
            id: id.to_string(),
            stateful: params.stateful_ops.iter().any(|s| s == id),
            instances: params.initial_instances,
            prev_instances: None,
            hosts: vec![ids[(i * 7) % ids.len()]],
            samples: VecDeque::new(),
        })
        .collect();

    let mut sim: Simulation<()> = Simulation::new();
    let mut t = 0;
    while t <= params.duration_ms {
        sim.schedule(t, ())
            .map_err(|e| ScaleError::InvalidInput(e.to_string()))?;
        t += params.eval_interval_ms;
    }
    let mut trace = Vec::new();
    let mut failure = None;
    let policy = params.policy;
    sim.run(|sim, _, ()| {
        if failure.is_some() {
            return;
        }
        let now_s = sim.now() as f64 / 1000.0;
        for op in ops.iter_mut() {
            let Some(row) = by_op[op.id.as_str()]
                .iter()
                .rev()
                .find(|r| r.time_s <= now_s)
            else {
                continue;
            };
            op.samples.push_back(row.queue_size);
            while op.samples.len() > policy.growth_samples.max(1) {
                op.samples.pop_front();
            }
            let available: f64 = op
                .hosts
                .iter()
                .map(|h| params.link_capacity * (1.0 - background[h]))
                .sum();
            let demand = row.input_rate.min(op.instances as f64 * policy.capacity.r);
            let utilization = demand / available;
            let metrics = OpMetrics {
                queue_samples: op.samples.iter().copied().collect(),
                input_rate: row.input_rate,
                output_rate: demand.min(available),
                link_utilization: utilization,
            };
            let leaf = overlay.leaf_set(op.hosts[0]).unwrap_or_default();
            let ctx = OpContext {
                op_id: op.id.clone(),
                stateful: op.stateful,
                instances: op.instances,
                prev_instances: op.prev_instances,
                leaf_candidates: leaf
                    .into_iter()
                    .filter(|n| !op.hosts.contains(n))
                    .map(|n| (n, background[&n]))
                    .collect(),
            };
            let d = match decide(&metrics, &ctx, &policy) {
                Ok(d) => d,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            };
            let mut target = None;
            match d.action {
                Action::None => {}
                Action::ScaleUp { new_count } => {
                    op.prev_instances = Some(op.instances as f64);
                    op.instances = new_count;
                }
                // Both add a host path; migration also moves state.
                Action::ScaleOut { target: n, .. } => {
                    op.hosts.push(n);
                    target = Some(n.to_string());
                }
            }
            trace.push(TraceRow {
                time_s: now_s,
                op_id: op.id.clone(),
                instances: op.instances,
                hosts: op.hosts.len(),
                health: d.health,
                link_utilization: utilization,
                action: d.action.name(),
                reason: d.reason.as_str(),
                target,
            });
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(trace),
    }
}

/// Time at which `op` completed its final run of at least three in-band
/// evaluations that lasts to the end of the trace.
pub fn stabilization_time(trace: &[TraceRow], op: &str, band: super::HealthBand) -> Option<f64> {
    let rows: Vec<&TraceRow> = trace.iter().filter(|r| r.op_id == op).collect();
    let in_band = |r: &TraceRow| r.action == "none" && r.health.is_none_or(|f| band.contains(f));
    let tail = rows.iter().rev().take_while(|r| in_band(r)).count();
    if tail < 3 {
        return None;
    }
    Some(rows[rows.len() - tail + 2].time_s)
}
