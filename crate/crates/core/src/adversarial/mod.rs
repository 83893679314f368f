//! Single-node direct evasion attacks, adversarial training with and
//! without self-supervision, and robustness evaluation.

mod eval;
mod local;
mod nettack;
mod surrogate;
mod training;

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use eval::{evaluate_perturbed, evaluate_under_attack, generate_attacks, AttackOutcome};
pub use local::local_logits;
pub use nettack::{nettack_lite, AttackContext};
pub use surrogate::Surrogate;
pub use training::{adversarial_train, adversarial_train_ss, AdvTrainConfig};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{NormalizedAdjacency, SparseGraph};
use crate::nn::{argmax, GcnParams, TrainConfig};
use crate::rng::{self, streams};
use crate::sparse::CsrMatrix;
use crate::train::{predict, train_supervised, ModelInputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    Links,
    Feats,
    LinksAndFeats,
}

impl AttackMode {
    pub fn edges(self) -> bool {
        matches!(self, AttackMode::Links | AttackMode::LinksAndFeats)
    }

    pub fn features(self) -> bool {
        matches!(self, AttackMode::Feats | AttackMode::LinksAndFeats)
    }
}

/// Optional restriction of the flips an attacker may consider.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CandidatePool {
    /// Nodes the target may gain or lose an edge to.
    pub nodes: Option<Vec<usize>>,
    /// Feature indices that may be toggled.
    pub features: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttackConfig {
    pub mode: AttackMode,
    pub n_perturb: usize,
    #[serde(default)]
    pub candidate_pool: Option<CandidatePool>,
}

impl AttackConfig {
    pub fn new(mode: AttackMode, n_perturb: usize) -> Self {
        Self {
            mode,
            n_perturb,
            candidate_pool: None,
        }
    }
}

/// Flips aimed at one target node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perturbation {
    pub target: usize,
    pub edge_flips: Vec<(usize, usize)>,
    pub feature_flips: Vec<(usize, usize)>,
}

impl Perturbation {
    pub fn empty(target: usize) -> Self {
        Self {
            target,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.edge_flips.len() + self.feature_flips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Budget and direct-attack locality.
    pub fn respects(&self, n_perturb: usize) -> bool {
        self.len() <= n_perturb
            && self
                .edge_flips
                .iter()
                .all(|&(i, j)| i != j && (i == self.target || j == self.target))
            && self.feature_flips.iter().all(|&(i, _)| i == self.target)
    }
}

pub fn save_perturbations(path: impl AsRef<Path>, perturbations: &[Perturbation]) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_vec(perturbations).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_perturbations(path: impl AsRef<Path>) -> Result<Vec<Perturbation>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

/// Labels over all nodes: ground truth on the training split, predictions
/// of a supervised model elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabels {
    pub labels: Vec<usize>,
    /// Whether each label came from the ground truth.
    pub from_truth: Vec<bool>,
    /// The model that produced the predictions.
    pub model: GcnParams,
}

pub fn fit_pseudo_labels(ds: &Dataset, cfg: &TrainConfig) -> Result<PseudoLabels> {
    let (model, _) = train_supervised(ds, cfg)?;
    let inputs = ModelInputs::new(ds, cfg);
    let logits = predict(&model, &inputs.x, &inputs.adj)?;
    let mut labels: Vec<usize> = (0..ds.num_nodes()).map(|v| argmax(logits.row(v))).collect();
    let mut from_truth = vec![false; ds.num_nodes()];
    for &v in &ds.splits.train {
        labels[v] = ds.labels[v];
        from_truth[v] = true;
    }
    Ok(PseudoLabels {
        labels,
        from_truth,
        model,
    })
}

/// Two disjoint uniform subsets of `pool`, returned as `(clean, attack)`.
pub fn sample_attack_sets(
    pool: &[usize],
    n_clean: usize,
    n_attack: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_clean + n_attack > pool.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot draw {n_clean} + {n_attack} nodes from a pool of {}",
            pool.len()
        )));
    }
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(&mut rng::stream(seed, streams::ATTACK_SETS));
    let mut clean = shuffled[..n_clean].to_vec();
    let mut attack = shuffled[n_clean..n_clean + n_attack].to_vec();
    clean.sort_unstable();
    attack.sort_unstable();
    Ok((clean, attack))
}

/// Graph and features after applying a set of perturbations.
#[derive(Debug, Clone)]
pub struct PerturbedGraph {
    pub graph: SparseGraph,
    pub raw_features: CsrMatrix,
    pub inputs: ModelInputs,
}

/// Applies every flip of every perturbation to copies of the dataset's
/// graph and features. The adjacency is renormalised only where degrees
/// changed. Targets must be distinct and no flip may appear twice.
pub fn apply_perturbations(
    ds: &Dataset,
    adj: &NormalizedAdjacency,
    normalize_features: bool,
    perturbations: &[Perturbation],
) -> Result<PerturbedGraph> {
    let mut seen = vec![false; ds.num_nodes()];
    let mut edges = Vec::new();
    let mut feats = Vec::new();
    for p in perturbations {
        if p.target >= ds.num_nodes() {
            return Err(Error::IndexOutOfRange {
                index: p.target,
                len: ds.num_nodes(),
            });
        }
        if std::mem::replace(&mut seen[p.target], true) {
            return Err(Error::InvalidConfig(format!(
                "target {} perturbed twice",
                p.target
            )));
        }
        edges.extend_from_slice(&p.edge_flips);
        feats.extend_from_slice(&p.feature_flips);
    }
    let graph = ds.graph.with_edge_flips(&edges)?;
    let mut changed: Vec<usize> = edges.iter().flat_map(|&(i, j)| [i, j]).collect();
    changed.sort_unstable();
    changed.dedup();
    let new_adj = adj.renormalize_incremental(&graph, &changed)?;
    let raw_features = ds.features.with_entries_toggled(&feats)?;
    let x = if normalize_features {
        raw_features.row_normalized()
    } else {
        raw_features.clone()
    };
    Ok(PerturbedGraph {
        graph,
        raw_features,
        inputs: ModelInputs { x, adj: new_adj },
    })
}

/// Drops flips already claimed by an earlier perturbation so the set can
/// be applied at once. Returns the number of dropped flips.
pub fn merge_perturbations(perturbations: &mut [Perturbation]) -> usize {
    let mut edges = std::collections::HashSet::new();
    let mut dropped = 0;
    for p in perturbations.iter_mut() {
        let before = p.edge_flips.len();
        p.edge_flips
            .retain(|&(i, j)| edges.insert((i.min(j), i.max(j))));
        dropped += before - p.edge_flips.len();
    }
    dropped
}
