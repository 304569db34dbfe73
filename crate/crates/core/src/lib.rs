//! Muon (orthogonalized momentum) and AdamW optimizers for matrix-shaped
//! parameters, with an exact SVD oracle, synthetic tasks and an experiment
//! harness for token-consumption comparisons.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod msign;
pub mod optim;
pub mod tasks;

pub use error::{Error, Result};
pub use linalg::{Matrix, Rng};
