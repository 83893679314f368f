//! Self-supervised pretext tasks expressed as pseudo-labelled datasets.
//!
//! Every task shares the propagation matrix Â with the target task; only
//! the input features, the targets and the node set differ.

mod completion;
mod kmeans;
pub mod partition;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use completion::graph_completion;
pub use kmeans::{kmeans, lloyd_from, node_clustering, KMeansResult};
pub use partition::{balance_factor, edgecut, graph_partition, partition_graph, Partition, PartitionConfig};

use crate::dataset::write_labels_u16;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::nn::DenseMatrix;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Clustering,
    Partitioning,
    Completion,
}

impl TaskKind {
    pub fn short_name(self) -> &'static str {
        match self {
            TaskKind::Clustering => "clu",
            TaskKind::Partitioning => "par",
            TaskKind::Completion => "comp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    MeanSquaredError,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SslTargets {
    /// One class index per node of the graph.
    Classes(Vec<usize>),
    /// One feature row per entry of the task's node set, in order.
    Features(DenseMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SslTask {
    pub kind: TaskKind,
    /// Task input when it differs from the model input (`None` means the
    /// task reads the same features as the target task).
    pub masked_features: Option<CsrMatrix>,
    pub targets: SslTargets,
    /// Nodes on which the task loss is evaluated.
    pub nodes: Vec<usize>,
    /// Width of the task head.
    pub output_dim: usize,
}

impl SslTask {
    pub fn loss_kind(&self) -> LossKind {
        match self.targets {
            SslTargets::Classes(_) => LossKind::CrossEntropy,
            SslTargets::Features(_) => LossKind::MeanSquaredError,
        }
    }

    /// Features to feed the extractor for this task.
    pub fn input<'a>(&'a self, model_input: &'a CsrMatrix) -> &'a CsrMatrix {
        self.masked_features.as_ref().unwrap_or(model_input)
    }

    /// Whether the task can reuse the target task's extractor pass.
    pub fn shares_input(&self) -> bool {
        self.masked_features.is_none()
    }

    pub fn class_labels(&self) -> Option<&[usize]> {
        match &self.targets {
            SslTargets::Classes(l) => Some(l),
            SslTargets::Features(_) => None,
        }
    }

    /// Writes classification pseudo-labels as a `labels.u16` sidecar.
    pub fn write_pseudo_labels(&self, path: impl AsRef<Path>) -> Result<()> {
        match self.class_labels() {
            Some(labels) => write_labels_u16(path, labels),
            None => Err(Error::InvalidConfig(
                "completion tasks have no class pseudo-labels".into(),
            )),
        }
    }
}

/// Settings for building any of the three tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SslTaskConfig {
    pub kind: TaskKind,
    /// Cluster or part count; `None` means the number of classes.
    pub k: Option<usize>,
    pub mask_fraction: f64,
    pub epsilon: f64,
    pub refinement_passes: usize,
    pub kmeans_iters: usize,
}

impl Default for SslTaskConfig {
    fn default() -> Self {
        Self {
            kind: TaskKind::Partitioning,
            k: None,
            mask_fraction: 0.1,
            epsilon: 0.05,
            refinement_passes: 10,
            kmeans_iters: 100,
        }
    }
}

impl SslTaskConfig {
    pub fn new(kind: TaskKind) -> Self {
        Self { kind, ..Self::default() }
    }

    /// Builds the task. Clustering reads the raw features, completion
    /// masks the model-input features, partitioning reads the graph.
    pub fn build(
        &self,
        raw_features: &CsrMatrix,
        model_features: &CsrMatrix,
        graph: &SparseGraph,
        num_classes: usize,
        seed: u64,
    ) -> Result<SslTask> {
        let k = self.k.unwrap_or(num_classes);
        match self.kind {
            TaskKind::Clustering => node_clustering(raw_features, k, seed, self.kmeans_iters),
            TaskKind::Partitioning => graph_partition(
                graph,
                &PartitionConfig {
                    k,
                    epsilon: self.epsilon,
                    refinement_passes: self.refinement_passes,
                    seed,
                },
            ),
            TaskKind::Completion => graph_completion(model_features, self.mask_fraction, seed),
        }
    }
}

/// Checks that `labels` split `0..n` into exactly `k` nonempty groups.
pub fn is_valid_cover(labels: &[usize], k: usize) -> bool {
    let mut counts = vec![0usize; k];
    for &l in labels {
        if l >= k {
            return false;
        }
        counts[l] += 1;
    }
    counts.iter().all(|&c| c > 0)
}
