//! Deterministic simulation of a decentralized edge stream-processing
//! system: overlay placement, bandit path planning, elastic scaling and
//! erasure-coded recovery.

pub mod autoscale;
pub mod banditnet;
pub mod dataflow;
pub mod harness;
pub mod overlay;
pub mod recovery;
pub mod simkernel;
