//! Margin-based softmax losses, a unified modulating-factor formulation of
//! them, and a reward-guided search over that factor for training
//! embedding models.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: dense matrices, stable reductions, seeded RNG streams
//! - [`margin`]: margin transforms, the modulating function and the losses
//! - [`model`]: MLP embedding model, cosine classifier head, backprop
//! - [`trainer`]: SGD with momentum and weight decay, epoch training
//! - [`search`]: factor search, Random-Softmax and fixed-loss runs
//! - [`eval`]: verification, identification and TPR@FAR protocols
//! - [`datasets`]: synthetic data, flat files, splits and pair lists
//! - [`experiment`]: config files, run directories and the CLI commands

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod margin;
pub mod model;
pub mod numerics;
pub mod search;
pub mod trainer;

pub use error::{Error, Result};
