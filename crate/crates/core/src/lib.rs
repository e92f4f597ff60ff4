//! DIGNN: a fraud detector that encodes a graph's topology and its node
//! attributes separately, fuses the two views with attention, and regularizes
//! training with variational mutual-information bounds.
//!
//! The crate is organised bottom-up:
//!
//! * [`ndcore`] - dense/sparse matrices, a define-by-run reverse-mode tape, Adam.
//! * [`graphdata`] - the fraud graph model, on-disk format, splits, batching and
//!   a synthetic generator with controllable homophily.
//! * [`model`] - encoders, attention fusion, classifier, decoders and losses.
//! * [`metrics`] - F1-macro, rank AUC, GMean.
//! * [`trainer`] - the epoch loop, evaluation, gradient checking and a
//!   feature-smoothing baseline.
// `!(x > 0.0)` is used to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod graphdata;
pub mod metrics;
pub mod model;
pub mod ndcore;
pub mod trainer;

pub use error::{Error, LoadError, Result};
