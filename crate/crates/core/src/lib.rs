//! Decentralized stochastic gradient descent over directed graphs with
//! transmission delays, where nodes know only their in-degree.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod builtin;
pub mod consensus;
pub mod digraph;
pub mod error;
pub mod experiments;
pub mod gossip;
pub mod io;
pub mod optimizer;
pub mod simulator;

pub use error::{Error, Result};
