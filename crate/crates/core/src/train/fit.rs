use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, NormalizedAdjacency};
use crate::nn::{
    adam_step, apply_head, argmax, extract, extractor_backward, head_backward, mse_loss,
    softmax_cross_entropy, AdamState, DenseMatrix, Dropout, GcnGrads, GcnParams, Head,
    TrainConfig,
};
use crate::rng::Rng;
use crate::sparse::CsrMatrix;
use crate::ssl::{SslTargets, SslTask};

/// Model-ready features and propagation matrix of a dataset.
#[derive(Debug, Clone)]
pub struct ModelInputs {
    pub x: CsrMatrix,
    pub adj: NormalizedAdjacency,
}

impl ModelInputs {
    pub fn new(ds: &Dataset, cfg: &TrainConfig) -> Self {
        Self {
            x: ds.model_features(cfg.normalize_features),
            adj: normalize_adjacency(&ds.graph),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub test_accuracy: f64,
    pub best_val_accuracy: f64,
    /// Number of optimisation steps behind the returned parameters.
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// Per-epoch values of every loss term, keyed by term name.
    pub loss_curves: BTreeMap<String, Vec<f64>>,
    pub val_accuracy_curve: Vec<f64>,
}

/// Logits of the target head without dropout.
pub fn predict(params: &GcnParams, x: &CsrMatrix, adj: &NormalizedAdjacency) -> Result<DenseMatrix> {
    let cache = extract(x, adj, &params.w0, None)?;
    apply_head(&cache, &params.head_target, None)
}

/// Fraction of `nodes` whose argmax logit equals the label.
pub fn accuracy(logits: &DenseMatrix, labels: &[usize], nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::EmptyNodeSet("accuracy"));
    }
    let correct = nodes
        .iter()
        .filter(|&&n| argmax(logits.row(n)) == labels[n])
        .count();
    Ok(correct as f64 / nodes.len() as f64)
}

/// Accuracy of the target head on one split.
pub fn evaluate(params: &GcnParams, ds: &Dataset, cfg: &TrainConfig, split: Split) -> Result<f64> {
    let inputs = ModelInputs::new(ds, cfg);
    let logits = predict(params, &inputs.x, &inputs.adj)?;
    accuracy(&logits, &ds.labels, ds.splits.get(split))
}

/// A loss evaluated on one head over the output of a shared extractor pass.
pub(crate) enum HeadTerm<'a> {
    Classify {
        head: Head,
        labels: &'a [usize],
        nodes: &'a [usize],
    },
    Regress {
        rows: &'a [usize],
        target: &'a DenseMatrix,
    },
}

/// One extractor pass on `(x, adj)` feeding weighted head terms.
pub(crate) struct Pass<'a> {
    pub x: &'a CsrMatrix,
    pub adj: &'a NormalizedAdjacency,
    pub dropout: Option<(f64, &'a mut Rng)>,
    pub terms: Vec<(HeadTerm<'a>, f64)>,
}

impl Pass<'_> {
    /// Adds the weighted gradients into `grads` and returns the unweighted
    /// loss of every term.
    pub fn accumulate(self, params: &GcnParams, grads: &mut GcnGrads) -> Result<Vec<f64>> {
        let dropout = self.dropout.map(|(rate, rng)| Dropout { rate, rng });
        let cache = extract(self.x, self.adj, &params.w0, dropout)?;
        let mut d_emb = DenseMatrix::zeros(cache.embedding.rows(), cache.embedding.cols());
        let mut losses = Vec::with_capacity(self.terms.len());
        for (term, weight) in &self.terms {
            let (head, rows, loss, dz) = match term {
                HeadTerm::Classify { head, labels, nodes } => {
                    let logits = apply_head(&cache, params.head(*head)?, None)?;
                    let (loss, mut dz) = softmax_cross_entropy(&logits, labels, nodes)?;
                    dz.scale(*weight);
                    (*head, None, loss, dz)
                }
                HeadTerm::Regress { rows, target } => {
                    let z = apply_head(&cache, params.head(Head::SelfSupervised)?, Some(rows))?;
                    let all: Vec<usize> = (0..rows.len()).collect();
                    let (loss, mut dz) = mse_loss(&z, target, &all)?;
                    dz.scale(*weight);
                    (Head::SelfSupervised, Some(*rows), loss, dz)
                }
            };
            let (d_head, d_e) = head_backward(&cache, params.head(head)?, rows, &dz)?;
            d_emb.add_scaled(&d_e, 1.0)?;
            let slot = match head {
                Head::Target => &mut grads.head_target,
                Head::SelfSupervised => &mut grads.head_ss,
            };
            match slot {
                Some(g) => g.add_scaled(&d_head, 1.0)?,
                None => *slot = Some(d_head),
            }
            losses.push(loss);
        }
        let d_w0 = extractor_backward(&cache, self.adj, &d_emb)?;
        grads.w0.add_scaled(&d_w0, 1.0)?;
        Ok(losses)
    }
}

/// Head terms of a self-supervised task. Tasks that read the model input
/// can join the supervised pass; others need a pass of their own.
pub(crate) fn ss_terms(task: &SslTask, weight: f64) -> (HeadTerm<'_>, f64) {
    let term = match &task.targets {
        SslTargets::Classes(labels) => HeadTerm::Classify {
            head: Head::SelfSupervised,
            labels,
            nodes: &task.nodes,
        },
        SslTargets::Features(target) => HeadTerm::Regress {
            rows: &task.nodes,
            target,
        },
    };
    (term, weight)
}

/// Adam training with early stopping on validation accuracy.
///
/// `objective(epoch, params)` returns the joint gradient and the value of
/// every named loss term. An epoch improves on the best so far when its
/// validation accuracy is higher, or equal with a lower validation loss.
/// The parameters of the best epoch are restored before testing.
pub(crate) fn fit<F>(
    ds: &Dataset,
    inputs: &ModelInputs,
    params: &mut GcnParams,
    cfg: &TrainConfig,
    loss_names: &[&str],
    mut objective: F,
) -> Result<RunResult>
where
    F: FnMut(usize, &GcnParams) -> Result<(GcnGrads, Vec<f64>)>,
{
    cfg.validate()?;
    let val = ds.splits.get(Split::Val);
    let test = ds.splits.get(Split::Test);
    if ds.splits.train.is_empty() {
        return Err(Error::EmptyNodeSet("train split"));
    }
    let score = |p: &GcnParams| -> Result<(f64, f64)> {
        let logits = predict(p, &inputs.x, &inputs.adj)?;
        let acc = accuracy(&logits, &ds.labels, val)?;
        let (loss, _) = softmax_cross_entropy(&logits, &ds.labels, val)?;
        Ok((acc, loss))
    };

    let mut curves: BTreeMap<String, Vec<f64>> =
        loss_names.iter().map(|n| (n.to_string(), Vec::new())).collect();
    let mut val_curve = Vec::new();
    let mut state = AdamState::new(params);
    let (mut best_acc, mut best_loss) = score(params)?;
    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut epochs_run = 0;

    for epoch in 0..cfg.epochs {
        let (grads, losses) = objective(epoch, params)?;
        for (name, value) in loss_names.iter().zip(&losses) {
            curves.get_mut(*name).expect("declared loss").push(*value);
        }
        adam_step(params, &grads, &mut state, cfg.learning_rate, cfg.weight_decay);
        epochs_run = epoch + 1;
        let (acc, loss) = score(params)?;
        val_curve.push(acc);
        if acc > best_acc || (acc == best_acc && loss < best_loss) {
            best_acc = acc;
            best_loss = loss;
            best_params.clone_from(params);
            best_epoch = epochs_run;
        } else if epochs_run - best_epoch >= cfg.patience {
            break;
        }
    }
    *params = best_params;
    let logits = predict(params, &inputs.x, &inputs.adj)?;
    Ok(RunResult {
        test_accuracy: accuracy(&logits, &ds.labels, test)?,
        best_val_accuracy: best_acc,
        best_epoch,
        epochs_run,
        loss_curves: curves,
        val_accuracy_curve: val_curve,
    })
}
