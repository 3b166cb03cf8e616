//! Discrete-event simulation: configuration, deterministic randomness,
//! the event engine, trace records, and model-level Monte-Carlo oracles.

pub mod config;
pub mod engine;
pub mod oracles;
pub mod rng;
pub mod trace;

pub use config::{AttackerConfig, ConfigError, FeeDist, Protocol, SimConfig, StrategyKind};
pub use engine::run_simulation;
pub use trace::{BlockKind, EventKind, EventRecord, EventTrace};
