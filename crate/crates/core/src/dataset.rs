//! Citation datasets and their on-disk directory format.
//!
//! A dataset directory holds:
//!
//! | file           | content                                                        |
//! |----------------|----------------------------------------------------------------|
//! | `meta.json`    | `{"name", "num_nodes", "feature_dim", "num_classes"}`          |
//! | `edges.tsv`    | one undirected edge per line, `i<TAB>j`, 0-based, `i < j`      |
//! | `features.f32` | little-endian `f32`, row-major, `num_nodes × feature_dim`      |
//! | `labels.u16`   | little-endian `u16`, one class index per node                  |
//! | `splits.json`  | `{"train": [..], "val": [..], "test": [..]}`                   |

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub num_nodes: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
}

/// Train / validation / test node sets.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl SplitSpec {
    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    fn validate(&self, num_nodes: usize) -> Result<()> {
        let mut seen = vec![false; num_nodes];
        for (name, set) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &v in set {
                if v >= num_nodes {
                    return Err(Error::InvalidDataset(format!(
                        "{name} split index {v} >= {num_nodes} nodes"
                    )));
                }
                if seen[v] {
                    return Err(Error::InvalidDataset(format!(
                        "node {v} appears in more than one split entry"
                    )));
                }
                seen[v] = true;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: SparseGraph,
    /// Raw feature rows as stored on disk.
    pub features: CsrMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub splits: SplitSpec,
}

/// Counts reported by the loader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub num_labeled: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graph: SparseGraph,
        features: CsrMatrix,
        labels: Vec<usize>,
        num_classes: usize,
        splits: SplitSpec,
    ) -> Result<Self> {
        let n = graph.num_nodes();
        if features.rows() != n || labels.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{n} nodes but {} feature rows and {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        splits.validate(n)?;
        Ok(Self {
            name: name.into(),
            graph,
            features,
            labels,
            num_classes,
            splits,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats {
            num_nodes: self.num_nodes(),
            num_edges: self.graph.num_edges(),
            feature_dim: self.feature_dim(),
            num_classes: self.num_classes,
            num_labeled: self.splits.train.len(),
        }
    }

    /// Features as fed to the model: row-normalized when `normalize`.
    pub fn model_features(&self, normalize: bool) -> CsrMatrix {
        if normalize {
            self.features.row_normalized()
        } else {
            self.features.clone()
        }
    }

    /// Nodes outside the training split.
    pub fn unlabeled_nodes(&self) -> Vec<usize> {
        let mut labeled = vec![false; self.num_nodes()];
        for &v in &self.splits.train {
            labeled[v] = true;
        }
        (0..self.num_nodes()).filter(|&v| !labeled[v]).collect()
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

/// Loads a dataset directory, validating shapes against `meta.json`.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let meta: DatasetMeta = read_json(&dir.join("meta.json"))?;
    let n = meta.num_nodes;
    let d = meta.feature_dim;

    let edges_path = dir.join("edges.tsv");
    let text = String::from_utf8(read(&edges_path)?)
        .map_err(|e| Error::InvalidDataset(format!("{}: {e}", edges_path.display())))?;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed = line
            .split_once('\t')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
        match parsed {
            Some(pair) => edges.push(pair),
            None => {
                return Err(Error::InvalidDataset(format!(
                    "{}:{}: expected `i<TAB>j`",
                    edges_path.display(),
                    lineno + 1
                )))
            }
        }
    }
    let graph = SparseGraph::build_csr(&edges, n)?;

    let feat_path = dir.join("features.f32");
    let raw = read(&feat_path)?;
    if raw.len() != n * d * 4 {
        return Err(Error::InvalidDataset(format!(
            "{}: {} bytes, expected {n} × {d} × 4",
            feat_path.display(),
            raw.len()
        )));
    }
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    row_offsets.push(0);
    for (i, chunk) in raw.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if v != 0.0 {
            col_indices.push(i % d);
            values.push(v as f64);
        }
        if d > 0 && i % d == d - 1 {
            row_offsets.push(col_indices.len());
        }
    }
    if d == 0 {
        row_offsets.resize(n + 1, 0);
    }
    let features = CsrMatrix::from_parts(n, d, row_offsets, col_indices, values)?;

    let labels_path = dir.join("labels.u16");
    let raw = read(&labels_path)?;
    if raw.len() != n * 2 {
        return Err(Error::InvalidDataset(format!(
            "{}: {} bytes, expected {n} × 2",
            labels_path.display(),
            raw.len()
        )));
    }
    let labels = raw
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]) as usize)
        .collect();

    let splits: SplitSpec = read_json(&dir.join("splits.json"))?;
    Dataset::new(meta.name, graph, features, labels, meta.num_classes, splits)
}

/// Writes `labels` in the `labels.u16` format.
pub fn write_labels_u16(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(labels.len() * 2);
    for &l in labels {
        let l = u16::try_from(l)
            .map_err(|_| Error::InvalidDataset(format!("label {l} does not fit in u16")))?;
        bytes.extend_from_slice(&l.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `ds` in the directory format read by [`load_dataset`].
pub fn write_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = DatasetMeta {
        name: ds.name.clone(),
        num_nodes: ds.num_nodes(),
        feature_dim: ds.feature_dim(),
        num_classes: ds.num_classes,
    };
    let meta_path = dir.join("meta.json");
    fs::write(&meta_path, serde_json::to_vec(&meta).map_err(|e| Error::json(&meta_path, e))?)
        .map_err(|e| Error::io(&meta_path, e))?;

    let edges_path = dir.join("edges.tsv");
    let mut f = fs::File::create(&edges_path).map_err(|e| Error::io(&edges_path, e))?;
    let mut buf = String::new();
    for (i, j, _) in ds.graph.edges() {
        buf.push_str(&format!("{i}\t{j}\n"));
    }
    f.write_all(buf.as_bytes())
        .map_err(|e| Error::io(&edges_path, e))?;

    let dense = ds.features.to_dense();
    let mut bytes = Vec::with_capacity(dense.data().len() * 4);
    for &v in dense.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let feat_path = dir.join("features.f32");
    fs::write(&feat_path, bytes).map_err(|e| Error::io(&feat_path, e))?;

    write_labels_u16(dir.join("labels.u16"), &ds.labels)?;

    let splits_path = dir.join("splits.json");
    fs::write(
        &splits_path,
        serde_json::to_vec(&ds.splits).map_err(|e| Error::json(&splits_path, e))?,
    )
    .map_err(|e| Error::io(&splits_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::DenseMatrix;

    fn toy() -> Dataset {
        let graph = SparseGraph::build_csr(&[(0, 1), (1, 2)], 3).unwrap();
        let features = CsrMatrix::from_dense(&DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.5, 0.25],
        ]));
        let splits = SplitSpec {
            train: vec![0],
            val: vec![1],
            test: vec![2],
        };
        Dataset::new("toy", graph, features, vec![0, 1, 1], 2, splits).unwrap()
    }

    #[test]
    fn write_then_read_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy();
        write_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(
            fs::read_to_string(dir.path().join("edges.tsv")).unwrap(),
            "0\t1\n1\t2\n"
        );
    }

    #[test]
    fn empty_edges_file_loads() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = toy();
        ds.graph = SparseGraph::build_csr(&[], 3).unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        assert_eq!(fs::read(dir.path().join("edges.tsv")).unwrap().len(), 0);
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.stats().num_edges, 0);
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&toy(), dir.path()).unwrap();
        fs::remove_file(dir.path().join("labels.u16")).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn feature_size_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&toy(), dir.path()).unwrap();
        fs::write(dir.path().join("features.f32"), [0u8; 12]).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::InvalidDataset(_))));
    }

    #[test]
    fn label_out_of_range_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&toy(), dir.path()).unwrap();
        write_labels_u16(dir.path().join("labels.u16"), &[0, 5, 1]).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::InvalidDataset(_))));
    }

    #[test]
    fn overlapping_splits_rejected() {
        let ds = toy();
        let splits = SplitSpec {
            train: vec![0],
            val: vec![0],
            test: vec![],
        };
        assert!(Dataset::new("x", ds.graph, ds.features, ds.labels, 2, splits).is_err());
    }

    #[test]
    fn unlabeled_excludes_train() {
        assert_eq!(toy().unlabeled_nodes(), vec![1, 2]);
    }
}
