//! Discrete-time simulator and optimization library for full-duplex
//! self-backhauled small-cell networks.
//!
//! A macro base station (MBS) with `L` antennas wirelessly backhauls a set of
//! full-duplex small cells, each serving `N` half-duplex UEs. Per slot the
//! scheduler enumerates per-cell transmission modes, weighs links by queue
//! backlog differentials (back-pressure), estimates achievable rates with MMSE
//! beamforming and geometric-programming power allocation, and serves the
//! two-hop queues with the max-weight mode.
//!
//! Modules follow the pipeline order: [`scenario`] builds topologies and
//! channels, [`beamforming`] the MBS beam vectors, [`modes`] the transmission
//! mode alphabet and SINR evaluation, [`power`] the weighted sum-rate power
//! allocation, [`scheduler`] the per-slot decision, [`traffic`] the FTP flow
//! model, and [`engine`] the slot loop and metrics.

pub mod beamforming;
pub mod engine;
pub mod modes;
pub mod power;
pub mod scenario;
pub mod scheduler;
pub mod traffic;
pub mod units;

pub use engine::{run_simulation, RunConfig, RunMetrics};
pub use scenario::{Baseline, CapabilityProfile, ChannelState, NodeId, ScenarioConfig, Topology};
