//! Model-free episodic control with state aggregation.
//!
//! The agent keeps one bounded buffer of `(state, value, count)` entries per
//! action. Value estimates come from a k-nearest-neighbour average in which
//! an aggregated entry counts as `count` points, both for deciding how many
//! neighbours are enough and for weighting the average. At the end of every
//! episode the discounted returns are written back, last step first: an exact
//! key match keeps the larger value, a close enough experience (by state
//! distance *and* value difference) is merged into its nearest entry as a
//! running mean, and anything else becomes a new entry, evicting the least
//! recently used one when the buffer is full.
//!
//! Setting the input threshold to zero recovers plain MFEC.
//!
//! Modules:
//!
//! * [`embedding`]: seeded Gaussian random projection from observations to state keys.
//! * [`store`]: the per-action value memory and its binary snapshot format.
//! * [`agent`]: action selection, return computation and episode writeback.
//! * [`envs`]: small deterministic environments (gridworld, noisy gridworld, scroller).
//! * [`harness`]: multi-seed experiment runner, CSV metrics and SVG plots.

pub mod agent;
pub mod embedding;
pub mod envs;
mod error;
pub mod harness;
pub mod rng;
pub mod store;

pub use agent::{AgentConfig, EpisodeTrace, ReturnTrace};
pub use embedding::{ProjectionMatrix, StateKey};
pub use envs::Environment;
pub use error::{Error, Result};
pub use store::{ActionBuffer, Entry, QecStore, WritebackBranch, WritebackOutcome};
