//! Repair missing activity labels in process-mining event logs.
//!
//! The crate trains a classifier on the events of a log whose activity is
//! known and uses it to fill in the events whose activity is missing. Each
//! event is described by the activity labels of its `k` predecessors
//! (prefix), its `k` successors (suffix) and its categorical attributes
//! such as the resource. Prefix and suffix each run through their own
//! two-layer LSTM; the final hidden states are concatenated with attribute
//! embeddings, batch-normalized, and mapped to a softmax over activities.
//!
//! Modules, bottom-up:
//!
//! - [`eventlog`]: the log data model with CSV and XES ingestion.
//! - [`corruption`]: seeded deletion of labels with a ground-truth ledger.
//! - [`dataset`]: vocabularies and fixed-width context samples.
//! - [`neural`]: layers with hand-written backward passes, Nadam, and a
//!   finite-difference gradient checker.
//! - [`repairnet`]: the assembled model, its training loop and `repair`.
//! - [`evaluation`]: success-rate scoring and repeated experiments.
//! - [`config`]: the flat `key = value` settings shared by the CLI.
//! - [`synthetic`]: the airport example and generated logs for tests.
//!
//! The guide in `book/` walks through the pipeline; its code blocks are
//! compiled as doctests of this crate.

pub mod config;
pub mod corruption;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod eventlog;
pub mod neural;
pub mod repairnet;
pub mod rng;
pub mod synthetic;

pub use crate::error::{Error, Result};

// The guide's code blocks run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/event-logs.md")]
    mod event_logs {}
    #[doc = include_str!("../../../book/src/corruption.md")]
    mod corruption {}
    #[doc = include_str!("../../../book/src/context.md")]
    mod context {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
