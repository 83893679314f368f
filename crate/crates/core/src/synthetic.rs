//! Small planted-partition citation-like graphs for tests and smoke runs.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::dataset::{Dataset, SplitSpec};
use crate::error::Result;
use crate::graph::SparseGraph;
use crate::nn::DenseMatrix;
use crate::rng;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedConfig {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
    /// Expected degree of each node.
    pub avg_degree: f64,
    /// Probability that an edge stays within its class.
    pub homophily: f64,
    /// Probability that a node carries each of its class's features.
    pub feature_rate: f64,
    /// Probability of each unrelated feature.
    pub noise_rate: f64,
    pub train_per_class: usize,
    pub num_val: usize,
    pub num_test: usize,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            num_nodes: 120,
            num_classes: 3,
            feature_dim: 30,
            avg_degree: 4.0,
            homophily: 0.85,
            feature_rate: 0.3,
            noise_rate: 0.05,
            train_per_class: 5,
            num_val: 30,
            num_test: 45,
        }
    }
}

/// Nodes are assigned classes round-robin; each class owns a contiguous
/// block of binary features.
pub fn planted_dataset(cfg: &PlantedConfig, seed: u64) -> Result<Dataset> {
    let mut r = rng::stream(seed, 0);
    let n = cfg.num_nodes;
    let c = cfg.num_classes;
    let labels: Vec<usize> = (0..n).map(|v| v % c).collect();
    let by_class: Vec<Vec<usize>> = (0..c)
        .map(|k| (0..n).filter(|&v| labels[v] == k).collect())
        .collect();

    let m = (cfg.avg_degree * n as f64 / 2.0).round() as usize;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let u = r.gen_range(0..n);
        let v = if r.gen::<f64>() < cfg.homophily {
            *by_class[labels[u]].choose(&mut r).expect("nonempty class")
        } else {
            r.gen_range(0..n)
        };
        edges.push((u, v));
    }
    let graph = SparseGraph::build_csr(&edges, n)?;

    let block = (cfg.feature_dim / c).max(1);
    let mut rows = vec![vec![0.0; cfg.feature_dim]; n];
    for (v, row) in rows.iter_mut().enumerate() {
        for (f, x) in row.iter_mut().enumerate() {
            let own = f / block == labels[v];
            let p = if own { cfg.feature_rate } else { cfg.noise_rate };
            if r.gen::<f64>() < p {
                *x = 1.0;
            }
        }
    }
    let features = CsrMatrix::from_dense(&DenseMatrix::from_rows(&rows));

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let mut train = Vec::new();
    for k in 0..c {
        train.extend(order.iter().filter(|&&v| labels[v] == k).take(cfg.train_per_class));
    }
    let rest: Vec<usize> = order.into_iter().filter(|v| !train.contains(v)).collect();
    let mut val = rest[..cfg.num_val].to_vec();
    let mut test = rest[cfg.num_val..cfg.num_val + cfg.num_test].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Dataset::new(
        "planted",
        graph,
        features,
        labels,
        c,
        SplitSpec { train, val, test },
    )
}
