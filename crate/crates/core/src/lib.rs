//! Cross-domain network representation learning.
//!
//! A structurally scarce *target* graph borrows random-walk statistics from
//! a richer *source* graph:
//!
//! 1. [`walker`] samples second-order biased walks on the source.
//! 2. [`balance`] clusters source nodes into degree-based super nodes and
//!    links every target degree class to super nodes of matching rank.
//! 3. [`transfer`] builds a super graph from the source walks and turns
//!    shortest-path scores into extra (and new) target edge weights.
//! 4. [`walker`] walks the reweighted target, [`embed`] trains skip-gram
//!    vectors on those walks, and [`eval`] scores them by classification.
//!
//! Everything weighted or learned is generic over [`Scalar`] (`f32`/`f64`);
//! the aliases below fix the common choice.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balance;
pub mod embed;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod transfer;
pub mod walker;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Graph64 = graph::Graph<f64>;
pub type Graph32 = graph::Graph<f32>;
pub type SuperNodeSet64 = balance::SuperNodeSet<f64>;
pub type CrossLinks64 = balance::CrossLinks<f64>;
pub type SuperGraph64 = transfer::SuperGraph<f64>;
pub type TransferResult64 = transfer::TransferResult<f64>;
pub type Embedding64 = embed::Embedding<f64>;
pub type Embedding32 = embed::Embedding<f32>;
pub type EmbeddingTable64 = embed::EmbeddingTable<f64>;
