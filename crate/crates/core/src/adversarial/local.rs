//! Views of a graph with flips incident to one target, and exact local
//! evaluation of the two-layer model at that target.

use crate::error::Result;
use crate::graph::SparseGraph;
use crate::nn::{DenseMatrix, GcnParams};

/// The base graph with edges between `target` and `added` inserted and
/// those to `removed` deleted.
#[derive(Debug, Clone)]
pub(crate) struct LocalEdits<'a> {
    pub base: &'a SparseGraph,
    pub target: usize,
    pub added: Vec<usize>,
    pub removed: Vec<usize>,
}

impl<'a> LocalEdits<'a> {
    pub fn new(base: &'a SparseGraph, target: usize) -> Self {
        Self {
            base,
            target,
            added: Vec::new(),
            removed: Vec::new(),
        }
    }

    pub fn flip(&mut self, u: usize) {
        if let Some(i) = self.added.iter().position(|&v| v == u) {
            self.added.swap_remove(i);
        } else if let Some(i) = self.removed.iter().position(|&v| v == u) {
            self.removed.swap_remove(i);
        } else if self.base.has_edge(self.target, u) {
            self.removed.push(u);
        } else {
            self.added.push(u);
        }
    }

    /// `1 + weighted degree` under the edits.
    pub fn degree_tilde(&self, k: usize) -> f64 {
        let base = 1.0 + self.base.weighted_degree(k);
        if k == self.target {
            let removed: f64 = self
                .removed
                .iter()
                .map(|&u| edge_weight(self.base, k, u))
                .sum();
            base + self.added.len() as f64 - removed
        } else if self.added.contains(&k) {
            base + 1.0
        } else if self.removed.contains(&k) {
            base - edge_weight(self.base, k, self.target)
        } else {
            base
        }
    }

    /// Calls `f(j, w)` for every neighbour of `k` under the edits.
    pub fn for_each_neighbor(&self, k: usize, mut f: impl FnMut(usize, f64)) {
        let t = self.target;
        for (&j, &w) in self.base.neighbors(k).iter().zip(self.base.neighbor_weights(k)) {
            let gone = if k == t {
                self.removed.contains(&j)
            } else {
                j == t && self.removed.contains(&k)
            };
            if !gone {
                f(j, w);
            }
        }
        if k == t {
            for &u in &self.added {
                f(u, 1.0);
            }
        } else if self.added.contains(&k) {
            f(t, 1.0);
        }
    }
}

fn edge_weight(g: &SparseGraph, i: usize, j: usize) -> f64 {
    let cols = g.neighbors(i);
    cols.binary_search(&j)
        .map_or(0.0, |p| g.neighbor_weights(i)[p])
}

/// Target-head logits of `edits.target` on the edited graph, touching
/// only its two-hop neighbourhood. `xw0` holds the clean `X · W0` rows and
/// `target_row` optionally replaces the target's model-input feature row
/// (as sorted column indices and values).
pub fn local_logits(
    params: &GcnParams,
    xw0: &DenseMatrix,
    base: &SparseGraph,
    target: usize,
    edge_partners: &[usize],
    target_row: Option<(&[usize], &[f64])>,
) -> Result<Vec<f64>> {
    let mut edits = LocalEdits::new(base, target);
    for &u in edge_partners {
        edits.flip(u);
    }
    local_logits_with(params, xw0, &edits, target_row)
}

pub(crate) fn local_logits_with(
    params: &GcnParams,
    xw0: &DenseMatrix,
    edits: &LocalEdits<'_>,
    target_row: Option<(&[usize], &[f64])>,
) -> Result<Vec<f64>> {
    let t = edits.target;
    let h = xw0.cols();
    let target_xw = match target_row {
        Some((cols, vals)) => {
            let mut out = vec![0.0; h];
            for (&j, &v) in cols.iter().zip(vals) {
                for (o, &w) in out.iter_mut().zip(params.w0.row(j)) {
                    *o += v * w;
                }
            }
            out
        }
        None => xw0.row(t).to_vec(),
    };
    let xw_row = |j: usize| if j == t { &target_xw[..] } else { xw0.row(j) };
    let inv_sqrt = |k: usize| 1.0 / edits.degree_tilde(k).sqrt();

    let s_t = inv_sqrt(t);
    let mut embedding = vec![0.0; h];
    let mut hidden = vec![0.0; h];
    let mut visit = |k: usize, w_tk: f64| {
        let s_k = inv_sqrt(k);
        hidden.iter_mut().for_each(|v| *v = 0.0);
        let mut add = |j: usize, w: f64, s_j: f64| {
            for (o, &x) in hidden.iter_mut().zip(xw_row(j)) {
                *o += w * s_k * s_j * x;
            }
        };
        add(k, 1.0, s_k);
        edits.for_each_neighbor(k, |j, w| add(j, w, inv_sqrt(j)));
        let a_tk = w_tk * s_t * s_k;
        for (e, &v) in embedding.iter_mut().zip(&hidden) {
            if v > 0.0 {
                *e += a_tk * v;
            }
        }
    };
    visit(t, 1.0);
    edits.for_each_neighbor(t, &mut visit);
    let head = &params.head_target;
    let mut logits = vec![0.0; head.cols()];
    for (i, &e) in embedding.iter().enumerate() {
        for (o, &w) in logits.iter_mut().zip(head.row(i)) {
            *o += e * w;
        }
    }
    Ok(logits)
}
