//! Linearised two-layer surrogate `Z = Â² X W` used to score flips.

use crate::error::Result;
use crate::graph::NormalizedAdjacency;
use crate::nn::{argmax, glorot_with, softmax_cross_entropy, DenseMatrix, GcnParams, TensorAdam};
use crate::rng::{self, streams};
use crate::sparse::CsrMatrix;
use crate::train::{predict, ModelInputs};

const LEARNING_RATE: f64 = 0.01;
const WEIGHT_DECAY: f64 = 5e-4;

#[derive(Debug, Clone)]
pub struct Surrogate {
    /// `feature_dim × classes`.
    pub w: DenseMatrix,
    adam: TensorAdam,
}

impl Surrogate {
    pub fn new(feature_dim: usize, classes: usize, seed: u64) -> Self {
        let w = glorot_with(feature_dim, classes, &mut rng::stream(seed, streams::SURROGATE));
        let adam = TensorAdam::new(&w);
        Self { w, adam }
    }

    pub fn logits(&self, x: &CsrMatrix, adj: &NormalizedAdjacency) -> Result<DenseMatrix> {
        adj.spmm(&adj.spmm(&x.mul_dense(&self.w)?)?)
    }

    /// Cross-entropy training against `labels` on `nodes`, continuing from
    /// the current weights and optimiser state. Returns the last loss.
    pub fn fit(
        &mut self,
        x: &CsrMatrix,
        adj: &NormalizedAdjacency,
        labels: &[usize],
        nodes: &[usize],
        epochs: usize,
    ) -> Result<f64> {
        let mut loss = f64::NAN;
        for _ in 0..epochs {
            let z = self.logits(x, adj)?;
            let (l, dz) = softmax_cross_entropy(&z, labels, nodes)?;
            let a = adj.matrix();
            let dw = x.t_mul_dense(&a.t_mul_dense(&a.t_mul_dense(&dz)?)?)?;
            self.adam.step(&mut self.w, &dw, LEARNING_RATE, WEIGHT_DECAY);
            loss = l;
        }
        Ok(loss)
    }

    /// Fits the surrogate to reproduce the predictions of `model` on every
    /// node of the clean graph.
    pub fn distill(
        &mut self,
        model: &GcnParams,
        inputs: &ModelInputs,
        epochs: usize,
    ) -> Result<f64> {
        let logits = predict(model, &inputs.x, &inputs.adj)?;
        let labels: Vec<usize> = (0..logits.rows()).map(|v| argmax(logits.row(v))).collect();
        let nodes: Vec<usize> = (0..logits.rows()).collect();
        self.fit(&inputs.x, &inputs.adj, &labels, &nodes, epochs)
    }
}
