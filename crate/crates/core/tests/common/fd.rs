//! A small GCN instance and its joint two-head objective.

use ssgcn::graph::{normalize_adjacency, NormalizedAdjacency};
use ssgcn::nn::{
    apply_head, extract, extractor_backward, head_backward, mse_loss, softmax_cross_entropy, DenseMatrix, GcnParams,
};
use ssgcn::sparse::CsrMatrix;

use super::{random_binary, random_graph};

pub const N: usize = 9;
pub const D: usize = 6;
pub const HIDDEN: usize = 5;
pub const C: usize = 3;
pub const SS: usize = 4;

pub struct Instance {
    pub x: CsrMatrix,
    pub adj: NormalizedAdjacency,
    pub params: GcnParams,
    pub labels: Vec<usize>,
    pub ss_labels: Vec<usize>,
}

pub fn instance(seed: u64) -> Instance {
    let graph = random_graph(N, 0.3, seed);
    let x = random_binary(N, D, 0.5, seed).map(|v| v * 0.7 + 0.1);
    Instance {
        x: CsrMatrix::from_dense(&x),
        adj: normalize_adjacency(&graph),
        params: GcnParams::init(D, HIDDEN, C, Some(SS), seed),
        labels: (0..N).map(|i| (i + seed as usize) % C).collect(),
        ss_labels: (0..N).map(|i| (i * 7 + seed as usize) % SS).collect(),
    }
}

pub fn flatten(p: &GcnParams) -> Vec<f64> {
    let mut v = p.w0.data().to_vec();
    v.extend_from_slice(p.head_target.data());
    v.extend_from_slice(p.head_ss.as_ref().unwrap().data());
    v
}

pub fn unflatten(v: &[f64]) -> GcnParams {
    let (w0, rest) = v.split_at(D * HIDDEN);
    let (head, ss) = rest.split_at(HIDDEN * C);
    GcnParams {
        w0: DenseMatrix::from_vec(D, HIDDEN, w0.to_vec()).unwrap(),
        head_target: DenseMatrix::from_vec(HIDDEN, C, head.to_vec()).unwrap(),
        head_ss: Some(DenseMatrix::from_vec(HIDDEN, SS, ss.to_vec()).unwrap()),
    }
}

/// `α1·CE(target) + α2·loss(ss head)` through one shared extractor, with
/// the two head gradients summed at the embedding.
pub fn joint(inst: &Instance, v: &[f64], regression: bool, alpha2: f64) -> (f64, Vec<f64>) {
    let p = unflatten(v);
    let cache = extract(&inst.x, &inst.adj, &p.w0, None).unwrap();
    let z = apply_head(&cache, &p.head_target, None).unwrap();
    let (l_sup, dz) = softmax_cross_entropy(&z, &inst.labels, &[0, 1, 8]).unwrap();
    let (dh_t, mut d_emb) = head_backward(&cache, &p.head_target, None, &dz).unwrap();
    let head_ss = p.head_ss.as_ref().unwrap();
    let z_ss = apply_head(&cache, head_ss, None).unwrap();
    let rows = [2usize, 4, 6];
    let (l_ss, mut dz_ss) = if regression {
        let target = DenseMatrix::from_vec(N, SS, (0..N * SS).map(|i| (i % 5) as f64 * 0.2).collect()).unwrap();
        mse_loss(&z_ss, &target, &rows).unwrap()
    } else {
        softmax_cross_entropy(&z_ss, &inst.ss_labels, &rows).unwrap()
    };
    dz_ss.scale(alpha2);
    let (dh_ss, d_emb_ss) = head_backward(&cache, head_ss, None, &dz_ss).unwrap();
    d_emb.add_scaled(&d_emb_ss, 1.0).unwrap();
    let dw0 = extractor_backward(&cache, &inst.adj, &d_emb).unwrap();
    let mut grad = dw0.data().to_vec();
    grad.extend_from_slice(dh_t.data());
    grad.extend_from_slice(dh_ss.data());
    (l_sup + alpha2 * l_ss, grad)
}
