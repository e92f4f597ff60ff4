//! Fraud-network data: the in-memory graph, its on-disk format, stratified
//! splits, per-epoch down-sampling and batching, and a synthetic generator.

mod batch;
mod graph;
pub mod io;
mod split;
mod synth;

pub use batch::{downsample_epoch, gather_batch, gather_inputs, make_batches, BatchSubgraph};
pub use graph::{neighbor_label_distribution, FraudGraph, NeighborDistribution, Relation, BENIGN, FRAUD, UNLABELED};
pub use io::{load_graph, save_graph};
pub use split::{normalize_features, stratified_split, SplitIndex, SplitRatios};
pub use synth::{synth_generate, SynthConfig, SYNTH_RELATION};
