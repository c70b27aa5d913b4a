//! Link-level simulation and analysis of a decentralized, contention-based
//! relay selection protocol with hybrid-ARQ.
//!
//! The crate is organized around five subsystems:
//!
//! - [`netmodel`] - node geometry, path loss, and Rayleigh block-fading
//!   channel sampling with fully seeded randomness.
//! - [`contention`] - the minislot contention process and the relay
//!   selection strategies (ID, ID-CSI-1, best-gain, nearest-decoder,
//!   source-only).
//! - [`link`] - transmission modes, SNR-threshold decoding, Chase-combining
//!   accumulation, and the RCPC incremental-redundancy schedule.
//! - [`analytic`] - closed-form selection probabilities and throughput
//!   approximations, an exact enumeration oracle, grid-search optimizers,
//!   and the signaling-overhead calculator.
//! - [`sim`] - the Monte Carlo engine running full per-packet protocol
//!   episodes and parameter sweeps with deterministic parallelism.

pub mod analytic;
pub mod contention;
pub mod link;
pub mod netmodel;
pub mod sim;

pub use analytic::{AnalyticScenario, OverheadInputs, OverheadReport, SelectionProbs};
pub use contention::{
    ContentionConfig, ContentionOutcome, MinislotResult, RelayState, SelectionResult, Strategy,
    WinnerWeighting,
};
pub use link::{AmcPolicy, ChaseAccumulator, RcpcSchedule, TransmissionMode};
pub use netmodel::{BlockFading, ChannelParams, LinkId, NodeId, Position, Topology};
pub use sim::{
    DecodeModel, ExperimentConfig, Sweep, SweepParam, ThroughputEstimate, TopologySpec,
    TransmissionPlan, TrialRecord,
};
