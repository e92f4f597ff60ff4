//! Graph directory format.
//!
//! ```text
//! <dir>/meta.json             {"num_nodes", "feature_dim", "relations": [..], "label_values"}
//! <dir>/features.f32le        N*D little-endian f32, row-major
//! <dir>/labels.i8             N signed bytes in {-1, 0, 1}
//! <dir>/edges_<relation>.u32le  (src, dst) little-endian u32 pairs, undirected
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LoadError, Result};
use crate::graphdata::{FraudGraph, Relation};
use crate::ndcore::Mat;

pub const META_FILE: &str = "meta.json";
pub const FEATURES_FILE: &str = "features.f32le";
pub const LABELS_FILE: &str = "labels.i8";
pub const LABEL_VALUES_NOTE: &str = "-1 unlabeled, 0 benign, 1 fraud";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub num_nodes: usize,
    pub feature_dim: usize,
    pub relations: Vec<String>,
    #[serde(default)]
    pub label_values: String,
}

pub fn edges_file(relation: &str) -> String {
    format!("edges_{relation}.u32le")
}

fn read(path: &Path) -> std::result::Result<Vec<u8>, LoadError> {
    if !path.exists() {
        return Err(LoadError::MissingFile(path.to_path_buf()));
    }
    fs::read(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn check_len(file: &str, bytes: &[u8], expected: u64) -> std::result::Result<(), LoadError> {
    if bytes.len() as u64 != expected {
        return Err(LoadError::LengthMismatch {
            file: file.to_string(),
            expected,
            found: bytes.len() as u64,
        });
    }
    Ok(())
}

/// Every file a graph directory consists of, in a fixed order.
pub fn graph_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let meta = read_meta(dir)?;
    let mut files = vec![dir.join(META_FILE), dir.join(FEATURES_FILE), dir.join(LABELS_FILE)];
    files.extend(meta.relations.iter().map(|r| dir.join(edges_file(r))));
    Ok(files)
}

pub fn read_meta(dir: &Path) -> Result<GraphMeta> {
    let bytes = read(&dir.join(META_FILE))?;
    serde_json::from_slice(&bytes).map_err(|e| LoadError::BadMeta(e.to_string()).into())
}

pub fn load_graph(dir: impl AsRef<Path>) -> Result<FraudGraph> {
    let dir = dir.as_ref();
    let meta = read_meta(dir)?;
    let (n, d) = (meta.num_nodes, meta.feature_dim);
    if n > u32::MAX as usize {
        return Err(LoadError::BadMeta(format!("num_nodes {n} exceeds u32 id space")).into());
    }

    let raw = read(&dir.join(FEATURES_FILE))?;
    check_len(FEATURES_FILE, &raw, (n * d * 4) as u64)?;
    let data = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let features = Mat::from_vec(n, d, data)?;

    let raw = read(&dir.join(LABELS_FILE))?;
    check_len(LABELS_FILE, &raw, n as u64)?;
    let labels: Vec<i8> = raw.iter().map(|&b| b as i8).collect();

    let mut relations = Vec::with_capacity(meta.relations.len());
    for name in &meta.relations {
        let file = edges_file(name);
        let raw = read(&dir.join(&file))?;
        if raw.len() % 8 != 0 {
            return Err(LoadError::LengthMismatch {
                file,
                expected: (raw.len() as u64 / 8 + 1) * 8,
                found: raw.len() as u64,
            }
            .into());
        }
        let mut edges = Vec::with_capacity(raw.len() / 8);
        for pair in raw.chunks_exact(8) {
            let a = u32::from_le_bytes([pair[0], pair[1], pair[2], pair[3]]);
            let b = u32::from_le_bytes([pair[4], pair[5], pair[6], pair[7]]);
            if let Some(&id) = [a, b].iter().find(|&&x| x as usize >= n) {
                return Err(LoadError::NodeOutOfRange {
                    file,
                    id: id as u64,
                    num_nodes: n,
                }
                .into());
            }
            edges.push((a, b));
        }
        relations.push(Relation {
            name: name.clone(),
            edges,
        });
    }
    FraudGraph::new(features, labels, relations)
}

/// Writes `g` in the directory format. Features are narrowed to `f32`.
pub fn save_graph(g: &FraudGraph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let meta = GraphMeta {
        num_nodes: g.num_nodes(),
        feature_dim: g.feature_dim(),
        relations: g.relations().iter().map(|r| r.name.clone()).collect(),
        label_values: LABEL_VALUES_NOTE.to_string(),
    };
    let mut json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    json.push('\n');
    fs::write(dir.join(META_FILE), json)?;

    let mut buf = Vec::with_capacity(g.features().data().len() * 4);
    for &v in g.features().data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(dir.join(FEATURES_FILE), buf)?;

    let labels: Vec<u8> = g.labels().iter().map(|&l| l as u8).collect();
    fs::write(dir.join(LABELS_FILE), labels)?;

    for rel in g.relations() {
        let mut buf = Vec::with_capacity(rel.edges.len() * 8);
        for &(a, b) in &rel.edges {
            buf.extend_from_slice(&a.to_le_bytes());
            buf.extend_from_slice(&b.to_le_bytes());
        }
        fs::write(dir.join(edges_file(&rel.name)), buf)?;
    }
    Ok(())
}
