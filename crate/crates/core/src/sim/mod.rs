//! Split-learning simulator over a modeled link.
//!
//! A toy network is cut after its first layer. Each round every client
//! compresses its cut-layer activations, the server decodes them, trains its
//! half and returns a compressed gradient. Only communication takes simulated
//! time; a round lasts as long as its slowest client.

pub mod config;
pub mod data;
pub mod link;
pub mod model;
pub mod runner;

pub use config::{Ablation, DownlinkRank, ResidualMode, SimConfig, CONFIG_KEYS, DEFAULT_SEED};
pub use data::{make_synthetic_task, Shard, SyntheticTask, TaskSpec};
pub use link::LinkModel;
pub use model::ToyModel;
pub use runner::{metrics_csv, run_experiment, unsplit_reference, write_atomic, Channel, RoundMetrics, Simulation};
