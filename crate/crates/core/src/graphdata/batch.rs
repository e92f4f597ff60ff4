use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graphdata::{FraudGraph, FRAUD, UNLABELED};
use crate::ndcore::{Mat, SparseRows};

/// One training batch: attribute rows, full-width adjacency rows and labels of
/// the batch nodes, all in `node_ids` order.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSubgraph {
    pub node_ids: Vec<usize>,
    pub features: Mat,
    pub topo_rows: SparseRows,
    pub labels: Vec<usize>,
}

/// Keeps every positive and an equal number of negatives drawn without
/// replacement (all negatives if there are fewer), then shuffles.
pub fn downsample_epoch<R: Rng + ?Sized>(train_ids: &[usize], labels: &[i8], rng: &mut R) -> Result<Vec<usize>> {
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = train_ids.iter().copied().partition(|&i| labels[i] == FRAUD);
    if pos.is_empty() {
        return Err(Error::Sampling("training set has no positive nodes".into()));
    }
    let keep = pos.len().min(neg.len());
    let (chosen, _) = neg.partial_shuffle(rng, keep);
    pos.extend_from_slice(chosen);
    pos.shuffle(rng);
    Ok(pos)
}

/// Consecutive chunks of `batch_size` ids; the last may be shorter.
pub fn make_batches(ids: &[usize], batch_size: usize) -> Result<Vec<Vec<usize>>> {
    if ids.is_empty() {
        return Err(Error::Sampling("cannot batch an empty id list".into()));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    Ok(ids.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

fn check_ids(g: &FraudGraph, ids: &[usize]) -> Result<()> {
    if let Some(&bad) = ids.iter().find(|&&i| i >= g.num_nodes()) {
        return Err(Error::Contract(format!(
            "node id {bad} out of range for a graph of {} nodes",
            g.num_nodes()
        )));
    }
    Ok(())
}

pub fn gather_batch(g: &FraudGraph, ids: &[usize]) -> Result<BatchSubgraph> {
    check_ids(g, ids)?;
    let mut labels = Vec::with_capacity(ids.len());
    for &i in ids {
        let l = g.labels()[i];
        if l == UNLABELED {
            return Err(Error::Contract(format!(
                "node {i} is unlabeled and cannot enter a batch"
            )));
        }
        labels.push(l as usize);
    }
    Ok(BatchSubgraph {
        node_ids: ids.to_vec(),
        features: g.features().select_rows(ids),
        topo_rows: g.union_adj().select_rows(ids),
        labels,
    })
}

/// Attribute and topology rows for arbitrary nodes, labeled or not.
pub fn gather_inputs(g: &FraudGraph, ids: &[usize]) -> Result<(Mat, SparseRows)> {
    check_ids(g, ids)?;
    Ok((g.features().select_rows(ids), g.union_adj().select_rows(ids)))
}
