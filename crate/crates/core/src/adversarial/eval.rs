use rayon::prelude::*;

use crate::adversarial::local::{local_logits_with, LocalEdits};
use crate::adversarial::{AttackConfig, AttackContext, Perturbation, Surrogate};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::{argmax, GcnParams, TrainConfig};
use crate::train::{accuracy, predict, ModelInputs};

/// Epochs used to fit a fresh surrogate to a model.
pub(crate) const SURROGATE_EPOCHS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    /// Accuracy on the targets, each classified on its own perturbed graph.
    pub accuracy: f64,
    /// Accuracy on the same targets without perturbation.
    pub clean_accuracy: f64,
    pub perturbations: Vec<Perturbation>,
}

/// Perturbations for every target, generated against a surrogate fitted to
/// the frozen `params` and aimed at the ground-truth labels.
pub fn generate_attacks(
    params: &GcnParams,
    ds: &Dataset,
    cfg: &TrainConfig,
    atk: &AttackConfig,
    targets: &[usize],
    seed: u64,
) -> Result<Vec<Perturbation>> {
    let inputs = ModelInputs::new(ds, cfg);
    let mut surrogate = Surrogate::new(ds.feature_dim(), ds.num_classes, seed);
    surrogate.distill(params, &inputs, SURROGATE_EPOCHS)?;
    AttackContext::new(&ds.graph, &ds.features, &surrogate, cfg.normalize_features)?
        .attack_all(targets, &ds.labels, atk)
}

/// Accuracy over the perturbation targets, each target evaluated on the
/// clean graph plus its own flips only.
pub fn evaluate_perturbed(
    params: &GcnParams,
    ds: &Dataset,
    cfg: &TrainConfig,
    perturbations: &[Perturbation],
) -> Result<f64> {
    if perturbations.is_empty() {
        return Err(Error::EmptyNodeSet("attack targets"));
    }
    let inputs = ModelInputs::new(ds, cfg);
    let xw0 = inputs.x.mul_dense(&params.w0)?;
    let correct: Result<Vec<bool>> = perturbations
        .par_iter()
        .map(|p| {
            let t = p.target;
            let mut edits = LocalEdits::new(&ds.graph, t);
            for &(i, j) in &p.edge_flips {
                edits.flip(if i == t { j } else { i });
            }
            let row = if p.feature_flips.is_empty() {
                None
            } else {
                let flips: Vec<(usize, usize)> = p.feature_flips.iter().map(|&(_, f)| (0, f)).collect();
                let (cols, vals) = ds.features.row(t);
                let single = crate::sparse::CsrMatrix::from_parts(
                    1,
                    ds.feature_dim(),
                    vec![0, cols.len()],
                    cols.to_vec(),
                    vals.to_vec(),
                )?
                .with_entries_toggled(&flips)?;
                Some(if cfg.normalize_features {
                    single.row_normalized()
                } else {
                    single
                })
            };
            let logits = local_logits_with(params, &xw0, &edits, row.as_ref().map(|r| r.row(0)))?;
            Ok(argmax(&logits) == ds.labels[t])
        })
        .collect();
    let correct = correct?;
    Ok(correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64)
}

/// Evasion evaluation: attacks every target against the frozen model and
/// classifies it on its perturbed graph.
pub fn evaluate_under_attack(
    params: &GcnParams,
    ds: &Dataset,
    cfg: &TrainConfig,
    atk: &AttackConfig,
    targets: &[usize],
    seed: u64,
) -> Result<AttackOutcome> {
    if targets.is_empty() {
        return Err(Error::EmptyNodeSet("attack targets"));
    }
    let inputs = ModelInputs::new(ds, cfg);
    let clean = accuracy(&predict(params, &inputs.x, &inputs.adj)?, &ds.labels, targets)?;
    let perturbations = generate_attacks(params, ds, cfg, atk, targets, seed)?;
    Ok(AttackOutcome {
        accuracy: evaluate_perturbed(params, ds, cfg, &perturbations)?,
        clean_accuracy: clean,
        perturbations,
    })
}
