//! Dense reference implementations shared by the integration tests.
#![allow(dead_code)]

pub mod fd;

use rand::Rng as _;
use ssgcn::graph::SparseGraph;
use ssgcn::nn::{argmax, DenseMatrix};
use ssgcn::rng;

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` computed entry by entry.
pub fn dense_normalized(a: &DenseMatrix) -> DenseMatrix {
    let n = a.rows();
    let deg: Vec<f64> = (0..n).map(|i| 1.0 + a.row(i).iter().sum::<f64>()).collect();
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let aij = a[(i, j)] + if i == j { 1.0 } else { 0.0 };
            out.row_mut(i)[j] = aij / (deg[i] * deg[j]).sqrt();
        }
    }
    out
}

pub fn dense_row_normalized(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for i in 0..x.rows() {
        let s: f64 = x.row(i).iter().sum();
        if s != 0.0 {
            out.row_mut(i).iter_mut().for_each(|v| *v /= s);
        }
    }
    out
}

/// `Â · ReLU(Â X W0) · Θ` with dense products only.
pub fn dense_gcn(a_hat: &DenseMatrix, x: &DenseMatrix, w0: &DenseMatrix, head: &DenseMatrix) -> DenseMatrix {
    let h = a_hat.matmul(&x.matmul(w0).unwrap()).unwrap().map(|v| v.max(0.0));
    a_hat.matmul(&h).unwrap().matmul(head).unwrap()
}

/// Logit of `label` minus the largest other logit.
pub fn margin(z: &[f64], label: usize) -> f64 {
    let best_other = z
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != label)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    z[label] - best_other
}

/// Margin of `t` under the linear surrogate `Â² X W`.
pub fn surrogate_margin(a: &DenseMatrix, x: &DenseMatrix, w: &DenseMatrix, normalize: bool, t: usize, label: usize) -> f64 {
    let a_hat = dense_normalized(a);
    let x = if normalize { dense_row_normalized(x) } else { x.clone() };
    let z = a_hat.matmul(&a_hat).unwrap().matmul(&x).unwrap().matmul(w).unwrap();
    margin(z.row(t), label)
}

pub fn toggle(m: &mut DenseMatrix, i: usize, j: usize) {
    let v = m[(i, j)];
    m.row_mut(i)[j] = if v != 0.0 { 0.0 } else { 1.0 };
}

/// Erdős–Rényi graph with edge probability `p`.
pub fn random_graph(n: usize, p: f64, seed: u64) -> SparseGraph {
    let mut r = rng::stream(seed, 1000);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    SparseGraph::build_csr(&edges, n).unwrap()
}

/// Binary matrix with entries set with probability `p`.
pub fn random_binary(rows: usize, cols: usize, p: f64, seed: u64) -> DenseMatrix {
    let mut r = rng::stream(seed, 1001);
    let data = (0..rows * cols).map(|_| if r.gen::<f64>() < p { 1.0 } else { 0.0 }).collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_uniform(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut r = rng::stream(seed, 1002);
    let data = (0..rows * cols).map(|_| r.gen_range(-1.0..1.0)).collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

/// Best single flip found by trying every candidate on dense copies.
/// Returns `(margin after flip, edge partner, feature)` of the lowest
/// margin, or `None` when no flip lowers the clean margin.
pub fn exhaustive_single_flip(
    a: &DenseMatrix,
    x: &DenseMatrix,
    w: &DenseMatrix,
    t: usize,
    label: usize,
    edges: bool,
    features: bool,
) -> (f64, Vec<(f64, Option<usize>, Option<usize>)>) {
    let clean = surrogate_margin(a, x, w, true, t, label);
    let mut scored = Vec::new();
    if edges {
        for u in (0..a.rows()).filter(|&u| u != t) {
            let mut a2 = a.clone();
            toggle(&mut a2, t, u);
            toggle(&mut a2, u, t);
            scored.push((surrogate_margin(&a2, x, w, true, t, label), Some(u), None));
        }
    }
    if features {
        for f in 0..x.cols() {
            let mut x2 = x.clone();
            toggle(&mut x2, t, f);
            scored.push((surrogate_margin(a, &x2, w, true, t, label), None, Some(f)));
        }
    }
    (clean, scored)
}

pub fn predictions(z: &DenseMatrix) -> Vec<usize> {
    (0..z.rows()).map(|i| argmax(z.row(i))).collect()
}
