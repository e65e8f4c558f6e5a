//! Erasure-coded operator checkpoints held by leaf-set members, and parallel
//! reconstruction after the owner fails.

mod codec;
pub mod gf256;

pub use codec::{decode, encode, ErasureConfig, Fragment, HEADER_LEN};

use serde::{Deserialize, Serialize};

use crate::overlay::{NodeId, Overlay, OverlayError};
use crate::simkernel::{SimError, Simulation, TimeMs};

pub const DEFAULT_CHECKPOINT_INTERVAL_MS: TimeMs = 1_000;
pub const DEFAULT_RATE_MBPS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecoveryError {
    #[error("invalid erasure config: {0}")]
    Config(String),
    #[error("n = {0} exceeds the 255 fragments GF(256) can index")]
    FieldSize(usize),
    #[error("state is empty")]
    EmptyState,
    #[error("{have} distinct fragments supplied, {need} needed")]
    InsufficientFragments { have: usize, need: usize },
    #[error("fragments come from different checkpoints")]
    MixedEpoch,
    #[error("malformed fragment: {0}")]
    Malformed(String),
    #[error("{owner} has {live} live leaf-set members, {needed} fragment holders needed")]
    LeafTooSmall {
        owner: NodeId,
        live: usize,
        needed: usize,
    },
    #[error("{failed} does not host {op}")]
    NotOwner { op: String, failed: NodeId },
    #[error("no checkpoint taken yet for {0}")]
    NoCheckpoint(String),
    #[error("no live leaf-set member of {0} can take over")]
    NoReplacement(NodeId),
    #[error("only {} fragments survive, {} needed; restarting without state", .report.fragments_fetched, .needed)]
    Unrecoverable {
        report: Box<RecoveryReport>,
        needed: usize,
    },
    #[error(transparent)]
    Overlay(#[from] OverlayError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRate {
    /// Uniform per-link transfer rate, Mbit/s.
    pub mbps: f64,
}

impl Default for LinkRate {
    fn default() -> Self {
        Self {
            mbps: DEFAULT_RATE_MBPS,
        }
    }
}

impl LinkRate {
    pub fn transfer_ms(&self, bytes: f64) -> f64 {
        bytes * 8.0 / (self.mbps * 1e6) * 1e3
    }
}

/// m B / (m + k - 1), where B is the time one providing peer needs to
/// upload one fragment.
pub fn model_time_ms(cfg: ErasureConfig, state_len: usize, rate: LinkRate) -> f64 {
    let b = rate.transfer_ms(cfg.fragment_len(state_len) as f64);
    cfg.m as f64 * b / (cfg.m + cfg.k - 1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateCheckpoint {
    pub op_instance: String,
    pub owner: NodeId,
    pub epoch: u32,
    pub taken_at: TimeMs,
    pub cfg: ErasureConfig,
    pub state_len: usize,
    /// `holders[i]` stores `fragments[i]`.
    pub holders: Vec<NodeId>,
    pub fragments: Vec<Fragment>,
}

/// The n physically nearest live leaf-set members of `owner` (ties: id).
pub fn fragment_holders(
    overlay: &Overlay,
    owner: NodeId,
    cfg: ErasureConfig,
) -> Result<Vec<NodeId>, RecoveryError> {
    cfg.validate()?;
    let mut leaf: Vec<(f64, NodeId)> = Vec::new();
    for id in overlay.leaf_set(owner)? {
        if overlay.is_live(id) && id != owner {
            leaf.push((overlay.distance(owner, id)?, id));
        }
    }
    if leaf.len() < cfg.n() {
        return Err(RecoveryError::LeafTooSmall {
            owner,
            live: leaf.len(),
            needed: cfg.n(),
        });
    }
    leaf.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(leaf.into_iter().take(cfg.n()).map(|(_, id)| id).collect())
}

/// Periodic checkpointing of one operator instance. Only the latest
/// checkpoint's fragments are kept; every epoch's time is recorded.
#[derive(Debug, Clone)]
pub struct Checkpointer {
    pub op_instance: String,
    pub owner: NodeId,
    pub cfg: ErasureConfig,
    pub interval_ms: TimeMs,
    pub holders: Vec<NodeId>,
    pub epochs: Vec<TimeMs>,
    latest: Option<StateCheckpoint>,
}

impl Checkpointer {
    pub fn new(
        overlay: &Overlay,
        op_instance: &str,
        owner: NodeId,
        cfg: ErasureConfig,
        interval_ms: TimeMs,
    ) -> Result<Self, RecoveryError> {
        if interval_ms == 0 {
            return Err(RecoveryError::Config(
                "checkpoint interval must be positive".into(),
            ));
        }
        Ok(Self {
            op_instance: op_instance.to_string(),
            owner,
            cfg,
            interval_ms,
            holders: fragment_holders(overlay, owner, cfg)?,
            epochs: Vec::new(),
            latest: None,
        })
    }

    pub fn latest(&self) -> Option<&StateCheckpoint> {
        self.latest.as_ref()
    }

    pub fn take(&mut self, now: TimeMs, state: &[u8]) -> Result<&StateCheckpoint, RecoveryError> {
        let epoch = self.epochs.len() as u32;
        let fragments = encode(state, self.cfg, epoch)?;
        self.epochs.push(now);
        Ok(self.latest.insert(StateCheckpoint {
            op_instance: self.op_instance.clone(),
            owner: self.owner,
            epoch,
            taken_at: now,
            cfg: self.cfg,
            state_len: state.len(),
            holders: self.holders.clone(),
            fragments,
        }))
    }

    /// Checkpoints at every multiple of the interval in (0, until_ms].
    pub fn run<F>(&mut self, until_ms: TimeMs, mut state_at: F) -> Result<usize, RecoveryError>
    where
        F: FnMut(TimeMs) -> Vec<u8>,
    {
        let mut sim: Simulation<()> = Simulation::new();
        sim.schedule(self.interval_ms, ())?;
        let mut failure = None;
        let interval = self.interval_ms;
        let taken = sim.run_until(until_ms, |sim, _, ()| {
            if failure.is_some() {
                return;
            }
            let now = sim.now();
            if let Err(e) = self.take(now, &state_at(now)) {
                failure = Some(e);
                return;
            }
            if let Err(e) = sim.schedule_in(interval, ()) {
                failure = Some(e.into());
            }
        })?;
        match failure {
            Some(e) => Err(e),
            None => Ok(taken),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub op_instance: String,
    pub failed: NodeId,
    pub replacement: NodeId,
    /// Fragments used on success; fragments that survived otherwise.
    pub fragments_fetched: usize,
    pub providers: usize,
    pub model_time_ms: f64,
    pub sim_time_ms: f64,
    /// Same state pulled whole from the nearest surviving holder.
    pub single_source_ms: Option<f64>,
    pub success: bool,
    pub fallback_restart: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovered {
    pub report: RecoveryReport,
    pub state: Vec<u8>,
}

/// Nearest live leaf-set member of `failed` (ties: id).
pub fn replacement_for(overlay: &Overlay, failed: NodeId) -> Result<NodeId, RecoveryError> {
    let mut best: Option<(f64, NodeId)> = None;
    for id in overlay.leaf_set(failed)? {
        if !overlay.is_live(id) || id == failed {
            continue;
        }
        let d = overlay.distance(failed, id)?;
        if best.is_none_or(|(bd, bid)| d < bd || (d == bd && id < bid)) {
            best = Some((d, id));
        }
    }
    best.map(|(_, id)| id)
        .ok_or(RecoveryError::NoReplacement(failed))
}

/// Restart of a stateless instance: no state moves.
pub fn restart_stateless(
    overlay: &Overlay,
    op_instance: &str,
    failed: NodeId,
) -> Result<RecoveryReport, RecoveryError> {
    Ok(RecoveryReport {
        op_instance: op_instance.to_string(),
        failed,
        replacement: replacement_for(overlay, failed)?,
        fragments_fetched: 0,
        providers: 0,
        model_time_ms: 0.0,
        sim_time_ms: 0.0,
        single_source_ms: Some(0.0),
        success: true,
        fallback_restart: false,
    })
}

/// Restarts the instance on the nearest live leaf member and rebuilds its
/// state. Decoding is column-wise, so the m fragment-lengths needed are
/// striped evenly over every live holder other than the replacement; the
/// slowest stripe plus its round trip is the simulated time.
pub fn recover(
    overlay: &Overlay,
    checkpoint: &StateCheckpoint,
    failed: NodeId,
    rate: LinkRate,
) -> Result<Recovered, RecoveryError> {
    if checkpoint.owner != failed {
        return Err(RecoveryError::NotOwner {
            op: checkpoint.op_instance.clone(),
            failed,
        });
    }
    let cfg = checkpoint.cfg;
    let replacement = replacement_for(overlay, failed)?;
    let live: Vec<usize> = (0..checkpoint.holders.len())
        .filter(|&i| overlay.is_live(checkpoint.holders[i]))
        .collect();
    let remote: Vec<usize> = live
        .iter()
        .copied()
        .filter(|&i| checkpoint.holders[i] != replacement)
        .collect();
    let model = model_time_ms(cfg, checkpoint.state_len, rate);

    let mut nearest_remote: Option<(f64, NodeId)> = None;
    for &i in &remote {
        let h = checkpoint.holders[i];
        let d = overlay.distance(replacement, h)?;
        if nearest_remote.is_none_or(|(bd, bid)| d < bd || (d == bd && h < bid)) {
            nearest_remote = Some((d, h));
        }
    }
    let single_source_ms = match nearest_remote {
        Some((_, h)) => {
            Some(rate.transfer_ms(checkpoint.state_len as f64) + overlay.rtt(replacement, h)?)
        }
        None => None,
    };

    let mut report = RecoveryReport {
        op_instance: checkpoint.op_instance.clone(),
        failed,
        replacement,
        fragments_fetched: live.len(),
        providers: 0,
        model_time_ms: model,
        sim_time_ms: 0.0,
        single_source_ms,
        success: false,
        fallback_restart: true,
    };
    if live.len() < cfg.m {
        return Err(RecoveryError::Unrecoverable {
            report: Box::new(report),
            needed: cfg.m,
        });
    }

    let frag = cfg.fragment_len(checkpoint.state_len) as f64;
    let p = remote.len();
    // With fewer than m remote holders the replacement's own fragment fills
    // the gap and every remote holder sends its whole fragment.
    let per_provider = if p == 0 {
        0.0
    } else if p >= cfg.m {
        cfg.m as f64 * frag / p as f64
    } else {
        frag
    };
    let mut max_rtt: f64 = 0.0;
    for &i in &remote {
        max_rtt = max_rtt.max(overlay.rtt(replacement, checkpoint.holders[i])?);
    }
    let sim_time_ms = if p == 0 {
        0.0
    } else {
        rate.transfer_ms(per_provider) + max_rtt
    };

    let fragments: Vec<Fragment> = live
        .iter()
        .map(|&i| checkpoint.fragments[i].clone())
        .collect();
    let state = decode(&fragments, cfg)?;
    report.fragments_fetched = cfg.m;
    report.providers = p;
    report.sim_time_ms = sim_time_ms;
    report.success = true;
    report.fallback_restart = false;
    Ok(Recovered { report, state })
}

#[cfg(test)]
mod tests;
