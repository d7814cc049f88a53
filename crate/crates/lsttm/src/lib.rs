//! Dual-graph online recommendation with temporal meta-learning.
//!
//! The crate models user preferences with two interaction graphs: a
//! short-term graph over recent in-domain clicks encoded by a temporal
//! graph-attention network, and a global long-term graph over in-domain
//! plus cross-domain clicks encoded by a second GAT trained with a
//! random-walk neighbor-similarity loss. The two user representations are
//! fused by an item-conditioned gate and scored with a DeepFM ranker.
//!
//! Training treats recommendation in adjacent time periods as meta-learning
//! tasks: an inner gradient step adapts the short-term and fusion
//! parameters on one hour, the outer step optimizes the initialization on
//! the next hour, and long-term parameters are updated asynchronously and
//! blocked from the meta-gradient. The same one-step adaptation powers
//! hourly online updates and the hour-by-hour CTR evaluation protocol.
//!
//! Entry points:
//! - [`datasim`] generates synthetic drifting interaction logs.
//! - [`train::daily_full_train`] produces a checkpoint from an event log.
//! - [`train::online_step`] applies an hourly one-step update.
//! - [`eval::temporal_eval`] runs the 24-hour evaluation protocol.
//! - [`cli`] backs the `lsttm` binary; see the examples directory for
//!   library-level walkthroughs of each capability.

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod datasim;
pub mod error;
pub mod eval;
pub mod events;
pub mod graph;
pub mod model;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
