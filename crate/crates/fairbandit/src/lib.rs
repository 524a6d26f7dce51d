//! Contextual bandits under individual fairness constraints, with online
//! Mahalanobis metric learning from weak oracle feedback.
//!
//! Each round hands the learner k context vectors. It must commit to a
//! distribution over arms in which similar contexts receive similar
//! probabilities, where "similar" is measured by an unknown Mahalanobis
//! metric. The only signal about the metric is a weak oracle that flags the
//! pairs treated too differently after the fact. The crate provides:
//!
//! - [`geometry`]: metric and context-set types; the linearization that
//!   turns squared distances into inner products.
//! - [`fair_lp`]: the per-round LP maximizing expected reward subject to
//!   pairwise probability caps, in single- and multi-action modes.
//! - [`metric_learner`]: version-space distance estimators driven by
//!   one-bit feedback, with a halfspace budget and redundancy pruning.
//! - [`reward_ucb`]: ridge regression with self-normalized confidence
//!   widths for optimistic reward estimates.
//! - [`policies`]: the three learner loops (known parameter, optimistic
//!   single-action, optimistic multi-action).
//! - [`environment`]: simulated truth - reward draws, the fairness oracle,
//!   and context generation.
//! - [`metrics`]: per-run accounting of regret, fairness loss, mistakes,
//!   and the width martingale.
//! - [`harness`]: config parsing/validation and the seeded experiment
//!   runner behind the `fairbandit` binary.
//!
//! The `examples/` directory has one runnable walkthrough per capability.

pub mod environment;
pub mod error;
pub mod fair_lp;
pub mod geometry;
pub mod harness;
pub mod metric_learner;
pub mod metrics;
pub mod pairs;
pub mod policies;
pub mod reward_ucb;
pub mod simplex;

pub use error::{Error, Result};
