//! Health-score driven elastic scaling: a secant solver for the instance
//! count and the scale-up / scale-out decision rule.

mod scenario;

pub use scenario::{
    default_pressure, read_pressure_csv, run_scaling_scenario, stabilization_time, PressureRow,
    ScalingParams, TraceRow,
};

use serde::{Deserialize, Serialize};

use crate::overlay::NodeId;
use crate::simkernel::SimRng;

/// Stand-in for a zero instance count in the secant history.
pub const ZERO_INSTANCES: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScaleError {
    #[error("degenerate load (R = 0 or Q = 0)")]
    DegenerateLoad,
    #[error("flat secant: f(x_n) = f(x_n-1)")]
    FlatSecant,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("operator {0:?} has no leaf-set member to scale out to")]
    NoTarget(String),
}

/// Throughput and queue room added by one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceCapacity {
    pub r: f64,
    pub q: f64,
}

/// Arrival rate and waiting queue of one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseWorkload {
    pub rate: f64,
    pub queue: f64,
}

pub fn health_score(
    x: f64,
    cap: InstanceCapacity,
    load: PhaseWorkload,
    alpha: f64,
) -> Result<f64, ScaleError> {
    if load.rate == 0.0 || load.queue == 0.0 {
        return Err(ScaleError::DegenerateLoad);
    }
    Ok(alpha * (x * cap.r / load.rate) + (1.0 - alpha) * (x * cap.q / load.queue))
}

/// Exact instance count with f = 1 (f is linear in x).
pub fn health_root(
    cap: InstanceCapacity,
    load: PhaseWorkload,
    alpha: f64,
) -> Result<f64, ScaleError> {
    Ok(1.0 / health_score(1.0, cap, load, alpha)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalerState {
    pub x_prev: f64,
    pub x_curr: f64,
    pub f_prev: f64,
    pub f_curr: f64,
}

/// x_{n+1} = x_n + (1 - f_n)(x_n - x_{n-1}) / (f_n - f_{n-1}).
pub fn secant_step(s: &ScalerState) -> Result<f64, ScaleError> {
    if s.f_curr == s.f_prev {
        return Err(ScaleError::FlatSecant);
    }
    Ok(s.x_curr + (1.0 - s.f_curr) * (s.x_curr - s.x_prev) / (s.f_curr - s.f_prev))
}

/// Instance count to actuate: rounded half-up, at least one.
pub fn actuate(x: f64) -> u32 {
    let r = (x + 0.5).floor();
    if r.is_nan() || r < 1.0 {
        1
    } else if r > u32::MAX as f64 {
        u32::MAX
    } else {
        r as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HealthBand {
    pub low: f64,
    pub high: f64,
}

impl Default for HealthBand {
    fn default() -> Self {
        Self {
            low: 0.9,
            high: 1.1,
        }
    }
}

impl HealthBand {
    pub fn contains(&self, f: f64) -> bool {
        f >= self.low && f <= self.high
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSolution {
    /// Instance counts tried, starting with the initial pair.
    pub trials: Vec<(f64, f64)>,
    pub instances: u32,
    pub converged: bool,
}

impl PhaseSolution {
    /// Trials up to and including the first healthy one.
    pub fn iterations(&self) -> usize {
        self.trials.len()
    }
}

/// Phase solve: try the initial pair, then secant steps on
/// actuated counts until the health score enters the band.
pub fn solve_phase(
    cap: InstanceCapacity,
    load: PhaseWorkload,
    alpha: f64,
    initial: (f64, f64),
    band: HealthBand,
    max_trials: usize,
) -> Result<PhaseSolution, ScaleError> {
    let f = |x: f64| health_score(x, cap, load, alpha);
    let mut trials = Vec::new();
    for x in [initial.0, initial.1] {
        let fx = f(x)?;
        trials.push((x, fx));
        if band.contains(fx) {
            return Ok(PhaseSolution {
                trials,
                instances: actuate(x),
                converged: true,
            });
        }
    }
    while trials.len() < max_trials {
        let n = trials.len();
        let (x_prev, f_prev) = trials[n - 2];
        let (x_curr, f_curr) = trials[n - 1];
        let (x_prev, f_prev) = if x_prev == 0.0 {
            (ZERO_INSTANCES, f(ZERO_INSTANCES)?)
        } else {
            (x_prev, f_prev)
        };
        let state = ScalerState {
            x_prev,
            x_curr,
            f_prev,
            f_curr,
        };
        let next = match secant_step(&state) {
            Ok(x) => actuate(x) as f64,
            Err(ScaleError::FlatSecant) => x_curr + 1.0,
            Err(e) => return Err(e),
        };
        let next = if next == x_curr { x_curr + 1.0 } else { next };
        let fx = f(next)?;
        trials.push((next, fx));
        if band.contains(fx) {
            return Ok(PhaseSolution {
                trials,
                instances: next as u32,
                converged: true,
            });
        }
    }
    let last = trials.last().expect("two initial trials").0;
    Ok(PhaseSolution {
        trials,
        instances: actuate(last),
        converged: false,
    })
}

/// Random phases whose exact root is at least 10 instances for 30-10
/// capacities, so an integer count inside the band always exists.
pub fn generate_phases(n: usize, rng: &mut SimRng) -> Vec<PhaseWorkload> {
    (0..n)
        .map(|_| PhaseWorkload {
            rate: rng.uniform(300.0, 3000.0),
            queue: rng.uniform(100.0, 1000.0),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalePolicy {
    pub alpha: f64,
    pub capacity: InstanceCapacity,
    pub band: HealthBand,
    /// Link utilization at or above this is a bandwidth bottleneck.
    pub link_threshold: f64,
    /// Strictly growing queue over this many samples is a compute
    /// bottleneck.
    pub growth_samples: usize,
}

impl Default for ScalePolicy {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            capacity: InstanceCapacity { r: 30.0, q: 10.0 },
            band: HealthBand::default(),
            link_threshold: 0.9,
            growth_samples: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpMetrics {
    /// Recent queue lengths, oldest first.
    pub queue_samples: Vec<f64>,
    pub input_rate: f64,
    pub output_rate: f64,
    pub link_utilization: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpContext {
    pub op_id: String,
    pub stateful: bool,
    pub instances: u32,
    /// Previous instance count for the secant; its health is re-evaluated
    /// under the current load. Without one the zero-instance point is used.
    pub prev_instances: Option<f64>,
    /// Leaf-set members of the current placement with their load.
    pub leaf_candidates: Vec<(NodeId, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    ComputeBottleneck,
    BandwidthBottleneckStateless,
    BandwidthBottleneckStateful,
    OverProvisioned,
    Healthy,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::ComputeBottleneck => "compute-bottleneck",
            Reason::BandwidthBottleneckStateless => "bandwidth-bottleneck-stateless",
            Reason::BandwidthBottleneckStateful => "bandwidth-bottleneck-stateful",
            Reason::OverProvisioned => "over-provisioned",
            Reason::Healthy => "healthy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    None,
    /// Set the instance count (also used to shrink when over-provisioned).
    ScaleUp {
        new_count: u32,
    },
    /// Replicate to (stateless) or migrate with state to (stateful) `target`.
    ScaleOut {
        target: NodeId,
        carry_state: bool,
    },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::None => "none",
            Action::ScaleUp { .. } => "scale-up",
            Action::ScaleOut {
                carry_state: false, ..
            } => "scale-out",
            Action::ScaleOut {
                carry_state: true, ..
            } => "migrate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleDecision {
    pub action: Action,
    pub reason: Reason,
    /// Health at the current count; None for a degenerate load.
    pub health: Option<f64>,
}

/// Pure decision rule. Bandwidth bottlenecks take precedence; compute
/// bottlenecks (growing queue or low health) rescale via the secant.
pub fn decide(
    m: &OpMetrics,
    ctx: &OpContext,
    policy: &ScalePolicy,
) -> Result<ScaleDecision, ScaleError> {
    let values = m
        .queue_samples
        .iter()
        .chain([&m.input_rate, &m.output_rate, &m.link_utilization]);
    for v in values {
        if !v.is_finite() || *v < 0.0 {
            return Err(ScaleError::InvalidInput(format!(
                "metric {v} must be finite and non-negative"
            )));
        }
    }
    if ctx.instances == 0 {
        return Err(ScaleError::InvalidInput(
            "instance count must be positive".into(),
        ));
    }
    let queue = m.queue_samples.last().copied().unwrap_or(0.0);
    let load = PhaseWorkload {
        rate: m.input_rate,
        queue,
    };
    let x = ctx.instances as f64;
    let health = match health_score(x, policy.capacity, load, policy.alpha) {
        Ok(f) => Some(f),
        Err(ScaleError::DegenerateLoad) => None,
        Err(e) => return Err(e),
    };

    if m.link_utilization >= policy.link_threshold {
        let target = ctx
            .leaf_candidates
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .ok_or_else(|| ScaleError::NoTarget(ctx.op_id.clone()))?
            .0;
        let reason = if ctx.stateful {
            Reason::BandwidthBottleneckStateful
        } else {
            Reason::BandwidthBottleneckStateless
        };
        return Ok(ScaleDecision {
            action: Action::ScaleOut {
                target,
                carry_state: ctx.stateful,
            },
            reason,
            health,
        });
    }

    let Some(f) = health else {
        return Ok(ScaleDecision {
            action: Action::None,
            reason: Reason::Healthy,
            health,
        });
    };
    let n = policy.growth_samples;
    let growing = n >= 2
        && m.queue_samples.len() >= n
        && m.queue_samples[m.queue_samples.len() - n..]
            .windows(2)
            .all(|w| w[1] > w[0]);
    let root = || -> Result<f64, ScaleError> {
        let xp = match ctx.prev_instances {
            Some(xp) if xp != x && xp > 0.0 => xp,
            _ => ZERO_INSTANCES,
        };
        let fp = health_score(xp, policy.capacity, load, policy.alpha)?;
        secant_step(&ScalerState {
            x_prev: xp,
            x_curr: x,
            f_prev: fp,
            f_curr: f,
        })
    };
    if growing || f < policy.band.low {
        let new_count = actuate(root()?).max(ctx.instances + 1);
        return Ok(ScaleDecision {
            action: Action::ScaleUp { new_count },
            reason: Reason::ComputeBottleneck,
            health,
        });
    }
    if f > policy.band.high {
        let new_count = actuate(root()?);
        if new_count < ctx.instances {
            return Ok(ScaleDecision {
                action: Action::ScaleUp { new_count },
                reason: Reason::OverProvisioned,
                health,
            });
        }
    }
    Ok(ScaleDecision {
        action: Action::None,
        reason: Reason::Healthy,
        health,
    })
}
