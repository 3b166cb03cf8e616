//! Signaling-based transaction inclusion for DAG ledgers.
//!
//! Concurrent blocks in a DAG waste capacity and split fees whenever two
//! miners pack the same transactions before either hears of the other's
//! block. This crate implements and analyzes a signaling protocol that
//! attacks the problem at its root, the effective network delay: every
//! block header carries a Bloom filter over the block's transaction ids
//! and propagates ahead of the body, so other miners discount the
//! signaled transactions within the (small) signal delay instead of the
//! (large) body delay.
//!
//! The crate has three layers:
//!
//! * protocol machinery — [`bloom`] signals and the [`protocol`] node
//!   state machine with its expected-value transaction pool;
//! * game theory — [`strategies`] (named strategies, the symmetric
//!   equilibrium solver) and [`analytics`] (closed-form utilization,
//!   throughput, revenue, gap bounds, attack expectations);
//! * experiments — the deterministic [`sim`] engine, [`metrics`]
//!   estimators, and the [`cli`] experiment runner, with every formula
//!   cross-validated against simulation in [`validation`].

pub mod analytics;
pub mod bloom;
pub mod cli;
pub mod metrics;
pub mod numeric;
pub mod protocol;
pub mod sim;
pub mod strategies;
pub mod validation;

pub use analytics::SystemParams;
pub use bloom::{BloomFilter, FloodPolicy};
pub use protocol::{BlockBody, BlockHeader, NodeState, Transaction, TxId};
pub use sim::{run_simulation, EventTrace, SimConfig};
pub use strategies::{equilibrium_strategy, InclusionStrategy};
