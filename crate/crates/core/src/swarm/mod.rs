//! Multi-agent quadrotor environment: neighborhoods, local graphs, rewards,
//! scenario targets and episode metrics.

mod env;
mod graph;
mod metrics;
mod neighbors;
mod reward;
mod room;
mod scenario;
mod trace;

use thiserror::Error;

pub use env::{EnvConfig, StepOutcome, SwarmEnv};
pub use graph::{build_local_graph, build_local_graphs, graph_from_neighbors, pose_of, LocalGraph};
pub use metrics::{summarize, EpisodeMetrics, EpisodeRecord};
pub use neighbors::{neighborhoods, neighborhoods_with, NeighborRule};
pub use reward::{reward_terms, ContactFlags, ContactTracker, RewardBreakdown, RewardCoeffs, RewardConfig};
pub use room::Room;
pub use scenario::{formation_offsets, Formation, LissajousCurve, Scenario, ScenarioConfig, ScenarioKind};
pub use trace::{trace_header, write_trace, TraceRow};

use crate::quad::DynamicsError;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("no episodes to summarize")]
    EmptyTrace,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}
