//! Numeric core: dense and sparse matrices, a reverse-mode tape, Adam and
//! seeded random streams.

mod adam;
mod mat;
pub mod rng;
mod sparse;
mod tape;

pub use adam::{Adam, AdamState};
pub use mat::Mat;
pub use sparse::SparseRows;
pub use tape::{Activation, Tape, Var};
