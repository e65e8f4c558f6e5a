//! Per-application dataflow graphs built from JOIN routes that converge on
//! a rendezvous node, plus zone-local scheduler election.

mod app;
mod graph;
mod scheduler;

pub use app::{synthetic_app, AppDocument, AppTopology, BoundApp, OpKind, OperatorSpec};
pub use graph::{DataflowGraph, DeploymentCost, InstanceKey, PlacementLoad, DEPLOY_BASE_MS};
pub use scheduler::{Assignment, SchedulerRegistry, DEFAULT_APPS_PER_SCHEDULER};

use crate::overlay::{NodeId, OverlayError};

/// Inner operators go only to nodes hosting fewer than this many operators;
/// the headroom up to four absorbs pinned sources and sinks.
pub const DEFAULT_MAX_OPS_PER_NODE: u32 = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataflowError {
    #[error("invalid application: {0}")]
    InvalidApp(String),
    #[error("operator or node binding {0:?} is missing or unknown")]
    UnknownBinding(String),
    #[error("node {0} is not live")]
    NotLive(NodeId),
    #[error(
        "application {app}: no free slot on route or leaf-set nodes for {needed} inner operators"
    )]
    Capacity { app: String, needed: usize },
    #[error("no shuffle edge {0:?} -> {1:?}")]
    UnknownEdge(String, String),
    #[error("edge {from:?} -> {to:?} cannot avoid node {avoid}")]
    Unroutable {
        from: String,
        to: String,
        avoid: NodeId,
    },
    #[error("zone {0} has no live nodes")]
    EmptyZone(u32),
    #[error("every live node in zone {0} is already a scheduler")]
    SchedulersExhausted(u32),
    #[error("application {0:?} already has a scheduler")]
    DuplicateApp(String),
    #[error(transparent)]
    Overlay(#[from] OverlayError),
}
