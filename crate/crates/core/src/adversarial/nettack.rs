//! Greedy single-target attack scored on the linear surrogate.
//!
//! With `s_k = d̃_k^{-1/2}` and `T_k = Σ_{j∈N[k]} s_j (XW)_j`, the surrogate
//! logits of the target are `z_t = s_t Σ_{k∈N[t]} s_k² T_k`. Flipping the
//! edge `(t, u)` only changes `s_t`, `s_u` and the neighbourhoods of `t` and
//! `u`, so the new logits follow from a handful of cached sums plus the
//! common neighbours of `t` and `u`. A feature flip on the target changes
//! `z_t` by `Â²[t,t] · Δ(XW)_t`. Edge weights are taken to be one.

use rayon::prelude::*;

use crate::adversarial::local::LocalEdits;
use crate::adversarial::{AttackConfig, Perturbation, Surrogate};
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::nn::DenseMatrix;
use crate::sparse::CsrMatrix;

/// Shared read-only state for attacking many targets of one graph.
pub struct AttackContext<'a> {
    graph: &'a SparseGraph,
    raw_features: &'a CsrMatrix,
    w: &'a DenseMatrix,
    /// Model-input `X · W`.
    xw: DenseMatrix,
    normalize: bool,
}

/// Raw feature row of the target and its product with `W`.
#[derive(Debug, Clone)]
struct TargetRow {
    cols: Vec<usize>,
    vals: Vec<f64>,
    raw_w: Vec<f64>,
    sum: f64,
}

impl TargetRow {
    fn new(raw: &CsrMatrix, t: usize, w: &DenseMatrix) -> Self {
        let (cols, vals) = raw.row(t);
        let mut raw_w = vec![0.0; w.cols()];
        for (&j, &v) in cols.iter().zip(vals) {
            for (o, &x) in raw_w.iter_mut().zip(w.row(j)) {
                *o += v * x;
            }
        }
        Self {
            cols: cols.to_vec(),
            vals: vals.to_vec(),
            raw_w,
            sum: vals.iter().sum(),
        }
    }

    fn scaled(raw_w: &[f64], sum: f64, normalize: bool) -> Vec<f64> {
        if !normalize {
            raw_w.to_vec()
        } else if sum != 0.0 {
            raw_w.iter().map(|v| v / sum).collect()
        } else {
            vec![0.0; raw_w.len()]
        }
    }

    fn xw(&self, normalize: bool) -> Vec<f64> {
        Self::scaled(&self.raw_w, self.sum, normalize)
    }

    /// `(raw_w, sum)` after toggling feature `f`.
    fn toggled(&self, f: usize, w: &DenseMatrix) -> (Vec<f64>, f64) {
        let (coef, dsum) = match self.cols.binary_search(&f) {
            Ok(p) => (-self.vals[p], -self.vals[p]),
            Err(_) => (1.0, 1.0),
        };
        let raw_w = self
            .raw_w
            .iter()
            .zip(w.row(f))
            .map(|(&a, &b)| a + coef * b)
            .collect();
        (raw_w, self.sum + dsum)
    }

    fn toggle(&mut self, f: usize, w: &DenseMatrix) {
        let (raw_w, sum) = self.toggled(f, w);
        self.raw_w = raw_w;
        self.sum = sum;
        match self.cols.binary_search(&f) {
            Ok(p) => {
                self.cols.remove(p);
                self.vals.remove(p);
            }
            Err(p) => {
                self.cols.insert(p, f);
                self.vals.insert(p, 1.0);
            }
        }
    }
}

/// `z[label] − max_{c ≠ label} z[c]`.
pub(crate) fn margin(z: &[f64], label: usize) -> f64 {
    let other = z
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != label)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    z[label] - other
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Flip {
    Edge(usize),
    Feature(usize),
}

impl<'a> AttackContext<'a> {
    pub fn new(
        graph: &'a SparseGraph,
        raw_features: &'a CsrMatrix,
        surrogate: &'a Surrogate,
        normalize: bool,
    ) -> Result<Self> {
        let w = &surrogate.w;
        if raw_features.rows() != graph.num_nodes() || raw_features.cols() != w.rows() {
            return Err(Error::ShapeMismatch {
                op: "attack context",
                left: raw_features.shape(),
                right: (graph.num_nodes(), w.rows()),
            });
        }
        let mut xw = DenseMatrix::zeros(graph.num_nodes(), w.cols());
        for t in 0..graph.num_nodes() {
            let row = TargetRow::new(raw_features, t, w).xw(normalize);
            xw.row_mut(t).copy_from_slice(&row);
        }
        Ok(Self {
            graph,
            raw_features,
            w,
            xw,
            normalize,
        })
    }

    /// Greedy attack on `target` against class `label`; see [`nettack_lite`].
    pub fn attack(&self, target: usize, label: usize, atk: &AttackConfig) -> Result<Perturbation> {
        Ok(self.attack_traced(target, label, atk)?.0)
    }

    /// Attacks every target, in parallel, against `labels[target]`.
    pub fn attack_all(
        &self,
        targets: &[usize],
        labels: &[usize],
        atk: &AttackConfig,
    ) -> Result<Vec<Perturbation>> {
        targets
            .par_iter()
            .map(|&t| self.attack(t, labels[t], atk))
            .collect()
    }

    /// The attack plus the surrogate margin before each round and after
    /// the last one.
    pub(crate) fn attack_traced(
        &self,
        t: usize,
        label: usize,
        atk: &AttackConfig,
    ) -> Result<(Perturbation, Vec<f64>)> {
        let n = self.graph.num_nodes();
        if t >= n {
            return Err(Error::IndexOutOfRange { index: t, len: n });
        }
        if label >= self.w.cols() {
            return Err(Error::IndexOutOfRange {
                index: label,
                len: self.w.cols(),
            });
        }
        let c = self.w.cols();
        let mut edits = LocalEdits::new(self.graph, t);
        let mut row = TargetRow::new(self.raw_features, t, self.w);
        let mut pert = Perturbation::empty(t);
        let mut flipped_nodes: Vec<usize> = Vec::new();
        let mut flipped_feats: Vec<usize> = Vec::new();
        let mut margins = Vec::new();
        let pool = atk.candidate_pool.as_ref();
        let node_candidates: Vec<usize> = match pool.and_then(|p| p.nodes.as_ref()) {
            Some(nodes) => nodes.clone(),
            None => (0..n).collect(),
        };
        let feat_candidates: Vec<usize> = match pool.and_then(|p| p.features.as_ref()) {
            Some(f) => f.clone(),
            None => (0..self.w.rows()).collect(),
        };

        let mut mark = vec![0.0; n];
        for round in 0..=atk.n_perturb {
            let deg: Vec<f64> = (0..n).map(|k| edits.degree_tilde(k)).collect();
            let s: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
            let xw_t = row.xw(self.normalize);
            let xw_row = |j: usize| if j == t { &xw_t[..] } else { self.xw.row(j) };

            let mut tk = DenseMatrix::zeros(n, c);
            for k in 0..n {
                let out = tk.row_mut(k);
                for (o, &x) in out.iter_mut().zip(xw_row(k)) {
                    *o += s[k] * x;
                }
                edits.for_each_neighbor(k, |j, _| {
                    for (o, &x) in out.iter_mut().zip(xw_row(j)) {
                        *o += s[j] * x;
                    }
                });
            }
            let mut nbrs = Vec::new();
            edits.for_each_neighbor(t, |k, _| nbrs.push(k));
            let st2 = s[t] * s[t];
            let mut big_s: Vec<f64> = tk.row(t).iter().map(|v| st2 * v).collect();
            let mut q = st2;
            for &k in &nbrs {
                let sk2 = s[k] * s[k];
                q += sk2;
                for (o, &v) in big_s.iter_mut().zip(tk.row(k)) {
                    *o += sk2 * v;
                }
            }
            let z: Vec<f64> = big_s.iter().map(|v| s[t] * v).collect();
            let current = margin(&z, label);
            margins.push(current);
            if round == atk.n_perturb {
                break;
            }

            let mut best: Option<(f64, Flip)> = None;
            let mut consider = |m: f64, flip: Flip| {
                if m < current && best.is_none_or(|(bm, _)| m < bm) {
                    best = Some((m, flip));
                }
            };
            let mut z_new = vec![0.0; c];

            if atk.mode.edges() {
                for &k in &nbrs {
                    mark[k] = s[k] * s[k];
                }
                let t_t = tk.row(t);
                for &u in &node_candidates {
                    if u == t || u >= n || flipped_nodes.contains(&u) {
                        continue;
                    }
                    let adding = !nbrs.contains(&u);
                    let a = if adding { 1.0 } else { -1.0 };
                    let st_new = 1.0 / (deg[t] + a).sqrt();
                    let su_new = 1.0 / (deg[u] + a).sqrt();
                    let (dt, du) = (st_new - s[t], su_new - s[u]);
                    let su2 = s[u] * s[u];
                    let common: f64 = self.graph.neighbors(u).iter().map(|&k| mark[k]).sum();
                    let q_rest = q - st2 - if adding { 0.0 } else { su2 };
                    let xw_u = self.xw.row(u);
                    let t_u = tk.row(u);
                    let st_new2 = st_new * st_new;
                    for ci in 0..c {
                        let mut inner = big_s[ci] - st2 * t_t[ci];
                        if !adding {
                            inner -= su2 * t_u[ci];
                        }
                        inner += dt * xw_t[ci] * q_rest + du * xw_u[ci] * common;
                        let link = if adding { su_new * xw_u[ci] } else { -s[u] * xw_u[ci] };
                        inner += st_new2 * (t_t[ci] + dt * xw_t[ci] + link);
                        if adding {
                            inner += su_new * su_new * (t_u[ci] + du * xw_u[ci] + st_new * xw_t[ci]);
                        }
                        z_new[ci] = st_new * inner;
                    }
                    consider(margin(&z_new, label), Flip::Edge(u));
                }
                for &k in &nbrs {
                    mark[k] = 0.0;
                }
            }

            if atk.mode.features() {
                let self_weight = st2 * q;
                for &f in &feat_candidates {
                    if f >= self.w.rows() || flipped_feats.contains(&f) {
                        continue;
                    }
                    let (raw_w, sum) = row.toggled(f, self.w);
                    let xw_new = TargetRow::scaled(&raw_w, sum, self.normalize);
                    for ci in 0..c {
                        z_new[ci] = z[ci] + self_weight * (xw_new[ci] - xw_t[ci]);
                    }
                    consider(margin(&z_new, label), Flip::Feature(f));
                }
            }

            match best {
                None => break,
                Some((_, Flip::Edge(u))) => {
                    edits.flip(u);
                    flipped_nodes.push(u);
                    pert.edge_flips.push((t.min(u), t.max(u)));
                }
                Some((_, Flip::Feature(f))) => {
                    row.toggle(f, self.w);
                    flipped_feats.push(f);
                    pert.feature_flips.push((t, f));
                }
            }
        }
        Ok((pert, margins))
    }
}

/// Greedy direct attack on one target. Each of up to `n_perturb` rounds
/// scores every candidate flip incident to the target (edges in link
/// modes, binary features of the target in feature modes) by the
/// surrogate margin of `label` after the flip, and applies the one with
/// the lowest margin. Candidates are scanned edges first, then features,
/// in ascending index order; the first of equal scores wins. The attack
/// stops early when no candidate lowers the margin.
pub fn nettack_lite(
    graph: &SparseGraph,
    raw_features: &CsrMatrix,
    surrogate: &Surrogate,
    normalize_features: bool,
    target: usize,
    label: usize,
    atk: &AttackConfig,
) -> Result<Perturbation> {
    AttackContext::new(graph, raw_features, surrogate, normalize_features)?.attack(target, label, atk)
}
