//! Two-layer GCN split into a shared feature extractor
//! `f(X, Â) = Â · ReLU(Â X W0)` and linear heads, so that
//! `Z = f(X, Â) · Θ` for the target task and `Z_ss = f(X_ss, Â) · Θ_ss`
//! for a self-supervised task.

use std::borrow::Cow;

use rand::Rng as _;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::nn::DenseMatrix;
use crate::rng::{self, streams, Rng};
use crate::sparse::CsrMatrix;

/// Uniform Glorot initialisation in `±sqrt(6 / (rows + cols))`.
pub fn glorot_init(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    glorot_with(rows, cols, &mut rng::stream(seed, 0))
}

pub(crate) fn glorot_with(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    DenseMatrix::from_vec(rows, cols, data).expect("length matches by construction")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    /// Extractor weights, `feature_dim × hidden`.
    pub w0: DenseMatrix,
    /// Target head Θ, `hidden × classes`.
    pub head_target: DenseMatrix,
    /// Self-supervised head Θ_ss, `hidden × ss_dim`.
    pub head_ss: Option<DenseMatrix>,
}

impl GcnParams {
    /// Glorot-initialised parameters. Each tensor draws from its own
    /// stream, so adding a self-supervised head leaves W0 and Θ unchanged.
    pub fn init(
        feature_dim: usize,
        hidden: usize,
        classes: usize,
        ss_dim: Option<usize>,
        seed: u64,
    ) -> Self {
        Self {
            w0: glorot_with(feature_dim, hidden, &mut rng::stream(seed, streams::INIT_EXTRACTOR)),
            head_target: glorot_with(
                hidden,
                classes,
                &mut rng::stream(seed, streams::INIT_TARGET_HEAD),
            ),
            head_ss: ss_dim.map(|m| {
                glorot_with(hidden, m, &mut rng::stream(seed, streams::INIT_SS_HEAD))
            }),
        }
    }

    /// A fresh self-supervised head of width `ss_dim`.
    pub fn init_ss_head(&mut self, ss_dim: usize, seed: u64) {
        self.head_ss = Some(glorot_with(
            self.hidden_dim(),
            ss_dim,
            &mut rng::stream(seed, streams::INIT_SS_HEAD),
        ));
    }

    pub fn hidden_dim(&self) -> usize {
        self.w0.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.head_target.cols()
    }

    pub fn head(&self, head: Head) -> Result<&DenseMatrix> {
        match head {
            Head::Target => Ok(&self.head_target),
            Head::SelfSupervised => self
                .head_ss
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("model has no self-supervised head".into())),
        }
    }

    /// SHA-256 over the little-endian bytes of every tensor.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for m in [Some(&self.w0), Some(&self.head_target), self.head_ss.as_ref()]
            .into_iter()
            .flatten()
        {
            h.update((m.rows() as u64).to_le_bytes());
            h.update((m.cols() as u64).to_le_bytes());
            for v in m.data() {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Target,
    SelfSupervised,
}

/// Inverted dropout applied to the input of each layer.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut Rng,
}

/// Intermediates of the extractor pass.
#[derive(Debug, Clone)]
pub struct ExtractorCache<'a> {
    /// Layer-1 input after dropout.
    input: Cow<'a, CsrMatrix>,
    /// `Â X W0`
    pub pre_activation: DenseMatrix,
    /// `ReLU(Â X W0)` after dropout.
    pub hidden: DenseMatrix,
    /// Per-entry dropout multipliers on `hidden` (`None` without dropout).
    hidden_mask: Option<Vec<f64>>,
    /// `Â · hidden`, the extractor output.
    pub embedding: DenseMatrix,
}

/// Forward cache for one head.
#[derive(Debug, Clone)]
pub struct ForwardCache<'a> {
    pub extractor: ExtractorCache<'a>,
    pub logits: DenseMatrix,
}

/// Runs the shared extractor.
pub fn extract<'a>(
    x: &'a CsrMatrix,
    adj: &NormalizedAdjacency,
    w0: &DenseMatrix,
    dropout: Option<Dropout<'_>>,
) -> Result<ExtractorCache<'a>> {
    if x.rows() != adj.num_nodes() {
        return Err(Error::ShapeMismatch {
            op: "gcn_forward",
            left: x.shape(),
            right: (adj.num_nodes(), adj.num_nodes()),
        });
    }
    let (input, mut rng_rate) = match dropout {
        Some(d) if d.rate > 0.0 => (Cow::Owned(x.dropout(d.rate, d.rng)), Some((d.rng, d.rate))),
        _ => (Cow::Borrowed(x), None),
    };
    let xw = input.mul_dense(w0)?;
    let pre_activation = adj.spmm(&xw)?;
    let mut hidden = pre_activation.map(|v| if v > 0.0 { v } else { 0.0 });
    let hidden_mask = rng_rate.as_mut().map(|(rng, rate)| {
        let keep = 1.0 / (1.0 - *rate);
        let mask: Vec<f64> = (0..hidden.data().len())
            .map(|_| if rng.gen::<f64>() < *rate { 0.0 } else { keep })
            .collect();
        for (h, m) in hidden.data_mut().iter_mut().zip(&mask) {
            *h *= m;
        }
        mask
    });
    let embedding = adj.spmm(&hidden)?;
    Ok(ExtractorCache {
        input,
        pre_activation,
        hidden,
        hidden_mask,
        embedding,
    })
}

/// `embedding[rows] · head` (all rows when `rows` is `None`).
pub fn apply_head(
    cache: &ExtractorCache<'_>,
    head: &DenseMatrix,
    rows: Option<&[usize]>,
) -> Result<DenseMatrix> {
    match rows {
        None => cache.embedding.matmul(head),
        Some(rows) => cache.embedding.select_rows(rows).matmul(head),
    }
}

/// Gradient of a head given `dz` for `rows` (all rows when `None`).
/// Returns `(d_head, d_embedding)` with `d_embedding` covering every node.
pub fn head_backward(
    cache: &ExtractorCache<'_>,
    head: &DenseMatrix,
    rows: Option<&[usize]>,
    dz: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let n = cache.embedding.rows();
    match rows {
        None => {
            if dz.shape() != (n, head.cols()) {
                return Err(Error::ShapeMismatch {
                    op: "head_backward",
                    left: dz.shape(),
                    right: (n, head.cols()),
                });
            }
            Ok((cache.embedding.t_matmul(dz)?, dz.matmul_t(head)?))
        }
        Some(rows) => {
            if dz.shape() != (rows.len(), head.cols()) {
                return Err(Error::ShapeMismatch {
                    op: "head_backward",
                    left: dz.shape(),
                    right: (rows.len(), head.cols()),
                });
            }
            let d_head = cache.embedding.select_rows(rows).t_matmul(dz)?;
            let d_sub = dz.matmul_t(head)?;
            let mut d_emb = DenseMatrix::zeros(n, head.rows());
            for (k, &r) in rows.iter().enumerate() {
                for (o, &v) in d_emb.row_mut(r).iter_mut().zip(d_sub.row(k)) {
                    *o += v;
                }
            }
            Ok((d_head, d_emb))
        }
    }
}

/// Gradient of W0 given the gradient w.r.t. the extractor output.
pub fn extractor_backward(
    cache: &ExtractorCache<'_>,
    adj: &NormalizedAdjacency,
    d_embedding: &DenseMatrix,
) -> Result<DenseMatrix> {
    if d_embedding.shape() != cache.embedding.shape() {
        return Err(Error::ShapeMismatch {
            op: "extractor_backward",
            left: d_embedding.shape(),
            right: cache.embedding.shape(),
        });
    }
    let mut d_hidden = adj.matrix().t_mul_dense(d_embedding)?;
    if let Some(mask) = &cache.hidden_mask {
        for (d, m) in d_hidden.data_mut().iter_mut().zip(mask) {
            *d *= m;
        }
    }
    // ReLU subgradient at exactly zero is zero.
    for (d, &p) in d_hidden
        .data_mut()
        .iter_mut()
        .zip(cache.pre_activation.data())
    {
        if p <= 0.0 {
            *d = 0.0;
        }
    }
    let d_xw = adj.matrix().t_mul_dense(&d_hidden)?;
    cache.input.t_mul_dense(&d_xw)
}

/// Full two-layer forward pass through one head.
pub fn gcn_forward<'a>(
    x: &'a CsrMatrix,
    adj: &NormalizedAdjacency,
    params: &GcnParams,
    head: Head,
    dropout: Option<Dropout<'_>>,
) -> Result<(DenseMatrix, ForwardCache<'a>)> {
    let weights = params.head(head)?;
    let extractor = extract(x, adj, &params.w0, dropout)?;
    let logits = apply_head(&extractor, weights, None)?;
    Ok((
        logits.clone(),
        ForwardCache { extractor, logits },
    ))
}

/// Gradients of W0 and one head.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnGrads {
    pub w0: DenseMatrix,
    pub head_target: Option<DenseMatrix>,
    pub head_ss: Option<DenseMatrix>,
}

impl GcnGrads {
    pub fn zeros_like(params: &GcnParams) -> Self {
        Self {
            w0: DenseMatrix::zeros(params.w0.rows(), params.w0.cols()),
            head_target: Some(DenseMatrix::zeros(
                params.head_target.rows(),
                params.head_target.cols(),
            )),
            head_ss: params
                .head_ss
                .as_ref()
                .map(|h| DenseMatrix::zeros(h.rows(), h.cols())),
        }
    }
}

/// Backward pass of [`gcn_forward`] for the given head.
pub fn gcn_backward(
    cache: &ForwardCache<'_>,
    adj: &NormalizedAdjacency,
    params: &GcnParams,
    dz: &DenseMatrix,
    head: Head,
) -> Result<GcnGrads> {
    let weights = params.head(head)?;
    if cache.extractor.embedding.cols() != weights.rows() {
        return Err(Error::ShapeMismatch {
            op: "gcn_backward",
            left: cache.extractor.embedding.shape(),
            right: weights.shape(),
        });
    }
    let (d_head, d_emb) = head_backward(&cache.extractor, weights, None, dz)?;
    let w0 = extractor_backward(&cache.extractor, adj, &d_emb)?;
    Ok(match head {
        Head::Target => GcnGrads {
            w0,
            head_target: Some(d_head),
            head_ss: None,
        },
        Head::SelfSupervised => GcnGrads {
            w0,
            head_target: None,
            head_ss: Some(d_head),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, SparseGraph};

    fn scalar_instance() -> (CsrMatrix, NormalizedAdjacency, GcnParams) {
        let adj = normalize_adjacency(&SparseGraph::build_csr(&[], 1).unwrap());
        let x = CsrMatrix::from_dense(&DenseMatrix::from_rows(&[vec![2.0]]));
        let params = GcnParams {
            w0: DenseMatrix::from_rows(&[vec![1.0]]),
            head_target: DenseMatrix::from_rows(&[vec![3.0]]),
            head_ss: None,
        };
        (x, adj, params)
    }

    #[test]
    fn glorot_deterministic_and_bounded() {
        assert_eq!(glorot_init(2, 2, 7), glorot_init(2, 2, 7));
        assert_ne!(glorot_init(3, 5, 1), glorot_init(3, 5, 2));
        let m = glorot_init(100, 100, 3);
        assert!(m.max_abs() <= (6.0f64 / 200.0).sqrt());
    }

    #[test]
    fn zero_input_gives_zero_logits() {
        let adj = normalize_adjacency(&SparseGraph::build_csr(&[(0, 1), (1, 2)], 3).unwrap());
        let x = CsrMatrix::from_dense(&DenseMatrix::zeros(3, 4));
        let params = GcnParams::init(4, 5, 2, None, 0);
        let (z, _) = gcn_forward(&x, &adj, &params, Head::Target, None).unwrap();
        assert_eq!(z, DenseMatrix::zeros(3, 2));
    }

    #[test]
    fn scalar_chain_forward_and_backward() {
        let (x, adj, params) = scalar_instance();
        let (z, cache) = gcn_forward(&x, &adj, &params, Head::Target, None).unwrap();
        assert_eq!(z, DenseMatrix::from_rows(&[vec![6.0]]));
        let g = gcn_backward(&cache, &adj, &params, &DenseMatrix::from_rows(&[vec![1.0]]), Head::Target)
            .unwrap();
        assert_eq!(g.head_target.unwrap(), DenseMatrix::from_rows(&[vec![2.0]]));
        assert_eq!(g.w0, DenseMatrix::from_rows(&[vec![6.0]]));
    }

    #[test]
    fn zero_upstream_gradient() {
        let (x, adj, params) = scalar_instance();
        let (_, cache) = gcn_forward(&x, &adj, &params, Head::Target, None).unwrap();
        let g = gcn_backward(&cache, &adj, &params, &DenseMatrix::zeros(1, 1), Head::Target).unwrap();
        assert_eq!(g.w0.max_abs(), 0.0);
        assert_eq!(g.head_target.unwrap().max_abs(), 0.0);
    }

    #[test]
    fn shape_errors() {
        let (x, _, params) = scalar_instance();
        let adj2 = normalize_adjacency(&SparseGraph::build_csr(&[], 2).unwrap());
        assert!(gcn_forward(&x, &adj2, &params, Head::Target, None).is_err());
        let (x, adj, params) = scalar_instance();
        assert!(gcn_forward(&x, &adj, &params, Head::SelfSupervised, None).is_err());
        let (_, cache) = gcn_forward(&x, &adj, &params, Head::Target, None).unwrap();
        assert!(gcn_backward(&cache, &adj, &params, &DenseMatrix::zeros(2, 1), Head::Target).is_err());
    }

    #[test]
    fn row_subset_head_matches_full() {
        let adj = normalize_adjacency(&SparseGraph::build_csr(&[(0, 1), (1, 2), (2, 3)], 4).unwrap());
        let x = CsrMatrix::from_dense(&glorot_init(4, 3, 5));
        let params = GcnParams::init(3, 4, 2, Some(3), 1);
        let cache = extract(&x, &adj, &params.w0, None).unwrap();
        let head = params.head_ss.as_ref().unwrap();
        let full = apply_head(&cache, head, None).unwrap();
        let sub = apply_head(&cache, head, Some(&[3, 1])).unwrap();
        assert_eq!(sub.row(0), full.row(3));
        assert_eq!(sub.row(1), full.row(1));

        let dz = glorot_init(2, 3, 9);
        let mut dz_full = DenseMatrix::zeros(4, 3);
        dz_full.row_mut(3).copy_from_slice(dz.row(0));
        dz_full.row_mut(1).copy_from_slice(dz.row(1));
        let (dh_sub, de_sub) = head_backward(&cache, head, Some(&[3, 1]), &dz).unwrap();
        let (dh_full, de_full) = head_backward(&cache, head, None, &dz_full).unwrap();
        assert!(dh_sub.max_abs_diff(&dh_full) < 1e-14);
        assert!(de_sub.max_abs_diff(&de_full) < 1e-14);
    }

    #[test]
    fn ss_head_does_not_disturb_other_init() {
        let a = GcnParams::init(5, 4, 3, None, 11);
        let b = GcnParams::init(5, 4, 3, Some(7), 11);
        assert_eq!(a.w0, b.w0);
        assert_eq!(a.head_target, b.head_target);
        assert_ne!(a.checksum(), b.checksum());
    }
}
