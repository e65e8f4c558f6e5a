//! Path planning over unreliable links: geometric per-link delays, the
//! KL-UCB cost-to-go router, its end-to-end and next-hop baselines, an
//! optimal oracle, and regret accounting.

mod graph;
mod kl;
mod policy;
mod regret;

pub use graph::{
    grid_road, grid_shape, random_net, ring_net, Link, LinkPath, NetGraph, SinkDistances,
    DEFAULT_PATH_CAP, THETA_MIN,
};
pub use kl::{kl_bernoulli, omega, u_star, LinkStats, DEFAULT_U_TOLERANCE};
pub use policy::{
    cost_to_go, geometric, lcb, link_costs, plan_end_to_end, step_lookahead, step_nexthop,
    transmit, BanditConfig, HopLimit, PacketOutcome, PathStats, PolicyKind, Router, StatsTable,
    MAX_ATTEMPTS,
};
pub use regret::{run_regret, RegretLedger};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BanditError {
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("invalid bandit config: {0}")]
    Config(String),
    #[error("more than {0} loop-free paths")]
    PathCap(usize),
    #[error("packet is already at the sink")]
    AtSink,
    #[error("no finite-cost link out of node {0}")]
    Stuck(u32),
    #[error("packet still in flight after {0} hops")]
    PacketLost(usize),
    #[error("link {link} needed {attempts} attempts")]
    Pathological { link: usize, attempts: u64 },
}

#[cfg(test)]
mod tests;
