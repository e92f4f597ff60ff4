use serde::Serialize;

use crate::error::{Error, LoadError, Result};
use crate::ndcore::{Mat, SparseRows};

pub const BENIGN: i8 = 0;
pub const FRAUD: i8 = 1;
pub const UNLABELED: i8 = -1;

/// A named, undirected edge list as stored on disk. May contain duplicates
/// and self-loops; both are dropped when building the union adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub name: String,
    pub edges: Vec<(u32, u32)>,
}

/// A fraud network: node features, labels and the union of all relations as
/// a symmetric 0/1 adjacency without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct FraudGraph {
    num_nodes: usize,
    feature_dim: usize,
    features: Mat,
    labels: Vec<i8>,
    relations: Vec<Relation>,
    union_adj: SparseRows,
}

impl FraudGraph {
    pub fn new(features: Mat, labels: Vec<i8>, relations: Vec<Relation>) -> Result<Self> {
        let num_nodes = labels.len();
        if features.rows() != num_nodes {
            return Err(Error::Dimension {
                op: "FraudGraph::new",
                left: features.shape(),
                right: (num_nodes, features.cols()),
            });
        }
        if let Some((node, &value)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| !(UNLABELED..=FRAUD).contains(&l))
        {
            return Err(LoadError::BadLabel { node, value }.into());
        }
        for r in 0..features.rows() {
            if let Some(col) = features.row(r).iter().position(|v| !v.is_finite()) {
                return Err(LoadError::NonFiniteFeature { node: r, col }.into());
            }
        }
        let mut entries = Vec::new();
        for rel in &relations {
            for &(a, b) in &rel.edges {
                let (a, b) = (a as usize, b as usize);
                if let Some(&id) = [a, b].iter().find(|&&x| x >= num_nodes) {
                    return Err(LoadError::NodeOutOfRange {
                        file: format!("edges_{}", rel.name),
                        id: id as u64,
                        num_nodes,
                    }
                    .into());
                }
                if a != b {
                    entries.push((a, b, 1.0));
                    entries.push((b, a, 1.0));
                }
            }
        }
        let union_adj = SparseRows::from_triplets(num_nodes, num_nodes, entries)?;
        Ok(Self {
            num_nodes,
            feature_dim: features.cols(),
            features,
            labels,
            relations,
            union_adj,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn features(&self) -> &Mat {
        &self.features
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn union_adj(&self) -> &SparseRows {
        &self.union_adj
    }

    /// Number of undirected edges in the union adjacency.
    pub fn num_union_edges(&self) -> usize {
        self.union_adj.nnz() / 2
    }

    /// Same graph with a replaced feature matrix of identical shape.
    pub fn with_features(&self, features: Mat) -> Result<Self> {
        if features.shape() != self.features.shape() {
            return Err(Error::Dimension {
                op: "with_features",
                left: self.features.shape(),
                right: features.shape(),
            });
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }

    pub fn labeled_ids(&self) -> Vec<usize> {
        (0..self.num_nodes).filter(|&i| self.labels[i] != UNLABELED).collect()
    }

    pub fn count_label(&self, label: i8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Fraud share among labeled nodes.
    pub fn fraud_fraction(&self) -> f64 {
        let labeled = self.num_nodes - self.count_label(UNLABELED);
        if labeled == 0 {
            return 0.0;
        }
        self.count_label(FRAUD) as f64 / labeled as f64
    }
}

/// For each class, the share of its labeled neighbors falling in each class.
/// `None` marks a class with no labeled neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeighborDistribution {
    /// `rows[c][k]`: fraction of class-`c` nodes' neighbors with label `k`.
    pub rows: [Option<[f64; 2]>; 2],
    pub counts: [[u64; 2]; 2],
}

impl NeighborDistribution {
    pub fn benign_row(&self) -> Option<[f64; 2]> {
        self.rows[BENIGN as usize]
    }

    pub fn fraud_row(&self) -> Option<[f64; 2]> {
        self.rows[FRAUD as usize]
    }
}

pub fn neighbor_label_distribution(g: &FraudGraph) -> NeighborDistribution {
    let mut counts = [[0u64; 2]; 2];
    let labels = g.labels();
    for u in 0..g.num_nodes() {
        let lu = labels[u];
        if lu == UNLABELED {
            continue;
        }
        for &v in g.union_adj().row_cols(u) {
            let lv = labels[v];
            if lv != UNLABELED {
                counts[lu as usize][lv as usize] += 1;
            }
        }
    }
    let rows = counts.map(|c| {
        let total = c[0] + c[1];
        (total > 0).then(|| [c[0] as f64 / total as f64, c[1] as f64 / total as f64])
    });
    NeighborDistribution { rows, counts }
}
