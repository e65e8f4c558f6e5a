use std::collections::HashMap;

use serde::Serialize;

use super::graph::{LinkPath, NetGraph};
use super::policy::{BanditConfig, PolicyKind, Router};
use super::BanditError;
use crate::simkernel::SimRng;

/// One policy's run of K packets under one seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretLedger {
    pub policy: &'static str,
    pub seed: u64,
    pub optimal_delay: f64,
    /// Cumulative expected-delay regret after each packet.
    pub expected: Vec<f64>,
    /// Cumulative observed-delay regret after each packet.
    pub realized: Vec<f64>,
    /// Observed delay of each packet.
    pub delays: Vec<f64>,
    /// 1-based index of the first packet sent along p*.
    pub first_optimal_trial: Option<usize>,
    /// Distinct paths taken, and which one each packet used.
    pub paths: Vec<LinkPath>,
    pub path_of: Vec<usize>,
}

impl RegretLedger {
    pub fn final_expected(&self) -> f64 {
        self.expected.last().copied().unwrap_or(0.0)
    }

    /// Most used path over the last `window` packets (ties: lowest path
    /// index, i.e. first taken).
    pub fn modal_path(&self, window: usize) -> Option<&LinkPath> {
        let start = self.path_of.len().saturating_sub(window.max(1));
        let mut counts = vec![0usize; self.paths.len()];
        for &p in &self.path_of[start..] {
            counts[p] += 1;
        }
        let best = (0..counts.len()).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))?;
        Some(&self.paths[best])
    }
}

/// Routes `packets` packets; the stream of randomness depends only on
/// (seed, policy name).
pub fn run_regret(
    graph: &NetGraph,
    policy: PolicyKind,
    cfg: BanditConfig,
    packets: usize,
    seed: u64,
) -> Result<RegretLedger, BanditError> {
    if packets == 0 {
        return Err(BanditError::Config("K must be at least 1".into()));
    }
    let mut rng = SimRng::fork(seed, policy.name());
    let mut router = Router::new(graph, policy, cfg)?;
    let optimal = graph.optimal_path();
    let d_star = graph.expected_delay(&optimal);
    let mut ledger = RegretLedger {
        policy: policy.name(),
        seed,
        optimal_delay: d_star,
        expected: Vec::with_capacity(packets),
        realized: Vec::with_capacity(packets),
        delays: Vec::with_capacity(packets),
        first_optimal_trial: None,
        paths: Vec::new(),
        path_of: Vec::with_capacity(packets),
    };
    let mut index: HashMap<LinkPath, usize> = HashMap::new();
    let (mut exp_cum, mut real_cum) = (0.0, 0.0);
    for k in 0..packets {
        let out = router.route_packet(&mut rng)?;
        // Same summation as d_star, so p* contributes exactly zero.
        exp_cum += graph.expected_delay(&out.path) - d_star;
        real_cum += out.delay_ms - d_star;
        ledger.expected.push(exp_cum);
        ledger.realized.push(real_cum);
        ledger.delays.push(out.delay_ms);
        if ledger.first_optimal_trial.is_none() && out.path == optimal {
            ledger.first_optimal_trial = Some(k + 1);
        }
        let next = ledger.paths.len();
        let id = *index.entry(out.path.clone()).or_insert(next);
        if id == next {
            ledger.paths.push(out.path);
        }
        ledger.path_of.push(id);
    }
    Ok(ledger)
}
