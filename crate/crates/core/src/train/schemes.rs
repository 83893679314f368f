use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::nn::{adam_step, argmax, AdamState, DenseMatrix, GcnGrads, GcnParams, Head, TrainConfig};
use crate::rng::{self, streams};
use crate::ssl::SslTask;
use crate::train::fit::{fit, predict, ss_terms, HeadTerm, ModelInputs, Pass, RunResult};

/// Epochs of self-supervised pretraining before finetuning.
pub const PRETRAIN_EPOCHS: usize = 200;

fn init_params(ds: &Dataset, cfg: &TrainConfig, ss_dim: Option<usize>) -> GcnParams {
    GcnParams::init(ds.feature_dim(), cfg.hidden_dim, ds.num_classes, ss_dim, cfg.seed)
}

/// Supervised training on `labels` restricted to `labeled`.
fn fit_labeled(
    ds: &Dataset,
    inputs: &ModelInputs,
    params: &mut GcnParams,
    cfg: &TrainConfig,
    labels: &[usize],
    labeled: &[usize],
) -> Result<RunResult> {
    let mut rng = rng::stream(cfg.seed, streams::DROPOUT_SUPERVISED);
    fit(ds, inputs, params, cfg, &["supervised"], |_, p| {
        let mut grads = GcnGrads::zeros_like(p);
        let losses = Pass {
            x: &inputs.x,
            adj: &inputs.adj,
            dropout: Some((cfg.dropout, &mut rng)),
            terms: vec![(
                HeadTerm::Classify { head: Head::Target, labels, nodes: labeled },
                cfg.alpha1,
            )],
        }
        .accumulate(p, &mut grads)?;
        Ok((grads, losses))
    })
}

/// Cross-entropy training on the labelled split, early-stopped on validation.
pub fn train_supervised(ds: &Dataset, cfg: &TrainConfig) -> Result<(GcnParams, RunResult)> {
    let inputs = ModelInputs::new(ds, cfg);
    let mut params = init_params(ds, cfg, None);
    let result = fit_labeled(ds, &inputs, &mut params, cfg, &ds.labels, &ds.splits.train)?;
    Ok((params, result))
}

/// Pretraining on the self-supervised task for [`PRETRAIN_EPOCHS`] epochs,
/// then supervised finetuning from the pretrained extractor.
pub fn pretrain_finetune(ds: &Dataset, task: &SslTask, cfg: &TrainConfig) -> Result<(GcnParams, RunResult)> {
    pretrain_finetune_with(ds, task, cfg, PRETRAIN_EPOCHS)
}

/// [`pretrain_finetune`] with an explicit pretraining length. Both heads are
/// re-initialised before finetuning; only the extractor carries over.
pub fn pretrain_finetune_with(
    ds: &Dataset,
    task: &SslTask,
    cfg: &TrainConfig,
    pretrain_epochs: usize,
) -> Result<(GcnParams, RunResult)> {
    cfg.validate()?;
    let inputs = ModelInputs::new(ds, cfg);
    let mut params = init_params(ds, cfg, Some(task.output_dim));
    let mut state = AdamState::new(&params);
    let ss_x = task.input(&inputs.x);
    for _ in 0..pretrain_epochs {
        let mut grads = GcnGrads::zeros_like(&params);
        grads.head_target = None;
        Pass {
            x: ss_x,
            adj: &inputs.adj,
            dropout: None,
            terms: vec![ss_terms(task, 1.0)],
        }
        .accumulate(&params, &mut grads)?;
        adam_step(&mut params, &grads, &mut state, cfg.learning_rate, cfg.weight_decay);
    }
    let fresh = init_params(ds, cfg, None);
    let mut params = GcnParams { w0: params.w0, ..fresh };
    let result = fit_labeled(ds, &inputs, &mut params, cfg, &ds.labels, &ds.splits.train)?;
    Ok((params, result))
}

/// Confidence-based self-training. Each stage trains from scratch on the
/// current labelled set, then, for every class, labels the
/// `additions_per_class` unlabelled nodes predicted as that class with the
/// largest softmax margin. Validation nodes are never pseudo-labelled.
pub fn self_train(
    ds: &Dataset,
    cfg: &TrainConfig,
    stages: usize,
    additions_per_class: usize,
) -> Result<(GcnParams, RunResult)> {
    let inputs = ModelInputs::new(ds, cfg);
    let mut labels = ds.labels.clone();
    let mut labeled = ds.splits.train.clone();
    let mut in_pool = vec![true; ds.num_nodes()];
    for &v in labeled.iter().chain(ds.splits.get(Split::Val)) {
        in_pool[v] = false;
    }
    let mut stage = 0;
    loop {
        let mut params = init_params(ds, cfg, None);
        let result = fit_labeled(ds, &inputs, &mut params, cfg, &labels, &labeled)?;
        if stage == stages {
            return Ok((params, result));
        }
        stage += 1;
        let logits = predict(&params, &inputs.x, &inputs.adj)?;
        add_confident(&logits, additions_per_class, &mut in_pool, &mut labels, &mut labeled);
    }
}

/// Moves the `per_class` most confident pool nodes of every predicted class
/// into the labelled set with their predicted label.
fn add_confident(
    logits: &DenseMatrix,
    per_class: usize,
    in_pool: &mut [bool],
    labels: &mut [usize],
    labeled: &mut Vec<usize>,
) {
    let mut by_class: Vec<Vec<(f64, usize)>> = vec![Vec::new(); logits.cols()];
    for v in (0..logits.rows()).filter(|&v| in_pool[v]) {
        let (class, margin) = softmax_margin(logits.row(v));
        by_class[class].push((margin, v));
    }
    for candidates in &mut by_class {
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, v) in candidates.iter().take(per_class) {
            labels[v] = argmax(logits.row(v));
            labeled.push(v);
            in_pool[v] = false;
        }
    }
    labeled.sort_unstable();
}

/// Predicted class and the gap between its probability and the runner-up's.
fn softmax_margin(z: &[f64]) -> (usize, f64) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    let top = argmax(z);
    let second = exp
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, &e)| e)
        .fold(0.0, f64::max);
    (top, (exp[top] - second) / sum)
}

/// Joint training of `α1·L_sup + α2·L_ss` through the shared extractor.
pub fn train_multitask(ds: &Dataset, task: &SslTask, cfg: &TrainConfig) -> Result<(GcnParams, RunResult)> {
    let inputs = ModelInputs::new(ds, cfg);
    if task.nodes.is_empty() {
        return Err(Error::EmptyNodeSet("self-supervised task"));
    }
    let mut params = init_params(ds, cfg, Some(task.output_dim));
    let mut rng = rng::stream(cfg.seed, streams::DROPOUT_SUPERVISED);
    let result = fit(
        ds,
        &inputs,
        &mut params,
        cfg,
        &["supervised", "self_supervised"],
        |_, p| {
            let mut grads = GcnGrads::zeros_like(p);
            let sup = (
                HeadTerm::Classify {
                    head: Head::Target,
                    labels: &ds.labels,
                    nodes: &ds.splits.train,
                },
                cfg.alpha1,
            );
            let mut terms = vec![sup];
            let shared = task.shares_input();
            if shared {
                terms.push(ss_terms(task, cfg.alpha2));
            }
            let mut losses = Pass {
                x: &inputs.x,
                adj: &inputs.adj,
                dropout: Some((cfg.dropout, &mut rng)),
                terms,
            }
            .accumulate(p, &mut grads)?;
            if !shared {
                losses.extend(
                    Pass {
                        x: task.input(&inputs.x),
                        adj: &inputs.adj,
                        dropout: None,
                        terms: vec![ss_terms(task, cfg.alpha2)],
                    }
                    .accumulate(p, &mut grads)?,
                );
            }
            Ok((grads, losses))
        },
    )?;
    Ok((params, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssl::{SslTaskConfig, TaskKind};
    use crate::synthetic::{planted_dataset, PlantedConfig};
    use crate::train::evaluate;

    fn setup(seed: u64) -> (Dataset, TrainConfig) {
        let ds = planted_dataset(&PlantedConfig::default(), seed).unwrap();
        let cfg = TrainConfig {
            epochs: 60,
            patience: 200,
            hidden_dim: 16,
            seed,
            ..TrainConfig::default()
        };
        (ds, cfg)
    }

    fn task(ds: &Dataset, cfg: &TrainConfig, kind: TaskKind) -> SslTask {
        let x = ds.model_features(true);
        SslTaskConfig { k: Some(4), epsilon: 0.3, ..SslTaskConfig::new(kind) }
            .build(&ds.features, &x, &ds.graph, ds.num_classes, cfg.seed)
            .unwrap()
    }

    #[test]
    fn margin_of_uniform_logits_is_zero() {
        assert_eq!(softmax_margin(&[1.0, 1.0, 1.0]), (0, 0.0));
        let (c, m) = softmax_margin(&[0.0, 5.0]);
        assert_eq!(c, 1);
        assert!(m > 0.98);
    }

    #[test]
    fn supervised_training_is_deterministic_and_learns() {
        let (ds, cfg) = setup(0);
        let (p1, r1) = train_supervised(&ds, &cfg).unwrap();
        let (p2, r2) = train_supervised(&ds, &cfg).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(r1, r2);
        assert!(r1.test_accuracy > 0.7, "{}", r1.test_accuracy);
        assert_eq!(r1.loss_curves["supervised"].len(), r1.epochs_run);
        let (p3, _) = train_supervised(&ds, &cfg.clone().with_seed(1)).unwrap();
        assert_ne!(p1, p3);
    }

    #[test]
    fn early_stopping_restores_best_parameters() {
        let (ds, mut cfg) = setup(1);
        cfg.patience = 5;
        cfg.epochs = 300;
        let (params, r) = train_supervised(&ds, &cfg).unwrap();
        assert!(r.epochs_run < 300);
        assert_eq!(r.epochs_run - r.best_epoch, 5);
        let val = evaluate(&params, &ds, &cfg, Split::Val).unwrap();
        assert_eq!(val, r.best_val_accuracy);
        let best = r.val_accuracy_curve.iter().copied().fold(0.0, f64::max);
        assert!(best <= r.best_val_accuracy);
        assert_eq!(evaluate(&params, &ds, &cfg, Split::Test).unwrap(), r.test_accuracy);
    }

    #[test]
    fn zero_epochs_returns_initialisation() {
        let (ds, mut cfg) = setup(2);
        cfg.epochs = 0;
        let (params, r) = train_supervised(&ds, &cfg).unwrap();
        assert_eq!(params, init_params(&ds, &cfg, None));
        assert_eq!((r.epochs_run, r.best_epoch), (0, 0));
        assert!(r.test_accuracy < 0.7);
    }

    #[test]
    fn zero_ss_weight_reduces_multitask_to_supervised() {
        let (ds, mut cfg) = setup(3);
        cfg.alpha2 = 0.0;
        let (sup_p, sup) = train_supervised(&ds, &cfg).unwrap();
        for kind in [TaskKind::Clustering, TaskKind::Partitioning, TaskKind::Completion] {
            let t = task(&ds, &cfg, kind);
            let (p, r) = train_multitask(&ds, &t, &cfg).unwrap();
            assert_eq!(p.w0, sup_p.w0, "{kind:?}");
            assert_eq!(p.head_target, sup_p.head_target);
            assert_eq!(r.loss_curves["supervised"], sup.loss_curves["supervised"]);
            assert_eq!(r.test_accuracy, sup.test_accuracy);
            assert!(r.loss_curves["self_supervised"].iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn multitask_lowers_the_self_supervised_loss() {
        let (ds, cfg) = setup(4);
        for kind in [TaskKind::Clustering, TaskKind::Partitioning, TaskKind::Completion] {
            let t = task(&ds, &cfg, kind);
            let (_, r) = train_multitask(&ds, &t, &cfg).unwrap();
            let curve = &r.loss_curves["self_supervised"];
            assert!(curve.last().unwrap() < &curve[0], "{kind:?}: {curve:?}");
        }
    }

    #[test]
    fn no_pretraining_reduces_to_supervised() {
        let (ds, cfg) = setup(5);
        let t = task(&ds, &cfg, TaskKind::Partitioning);
        let (p, r) = pretrain_finetune_with(&ds, &t, &cfg, 0).unwrap();
        let (sup_p, sup) = train_supervised(&ds, &cfg).unwrap();
        assert_eq!(p, sup_p);
        assert_eq!(r, sup);
    }

    #[test]
    fn pretraining_changes_only_the_extractor_start() {
        let (ds, cfg) = setup(6);
        let t = task(&ds, &cfg, TaskKind::Clustering);
        let (p, r) = pretrain_finetune_with(&ds, &t, &cfg, 20).unwrap();
        assert!(p.head_ss.is_none());
        assert!(r.test_accuracy > 0.5);
        let (sup_p, _) = train_supervised(&ds, &cfg).unwrap();
        assert_ne!(p.w0, sup_p.w0);
    }

    #[test]
    fn zero_stages_reduce_self_training_to_supervised() {
        let (ds, cfg) = setup(7);
        let (p, r) = self_train(&ds, &cfg, 0, 10).unwrap();
        let (sup_p, sup) = train_supervised(&ds, &cfg).unwrap();
        assert_eq!(p, sup_p);
        assert_eq!(r, sup);
        let (_, staged) = self_train(&ds, &cfg, 2, 5).unwrap();
        assert!(staged.test_accuracy > 0.5);
    }

    #[test]
    fn confident_additions_grow_the_labelled_set() {
        let logits = DenseMatrix::from_rows(&[
            vec![3.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 2.0],
            vec![0.0, 5.0],
            vec![4.0, 0.0],
            vec![0.0, 9.0],
        ]);
        let mut in_pool = vec![true, true, true, true, true, false];
        let mut labels = vec![1, 1, 0, 0, 1, 0];
        let mut labeled = vec![5];
        add_confident(&logits, 1, &mut in_pool, &mut labels, &mut labeled);
        assert_eq!(labeled, vec![3, 4, 5]);
        assert_eq!(labels, vec![1, 1, 0, 1, 0, 0]);
        assert_eq!(in_pool, vec![true, true, true, false, false, false]);
        add_confident(&logits, 5, &mut in_pool, &mut labels, &mut labeled);
        assert_eq!(labeled, vec![0, 1, 2, 3, 4, 5]);
        assert!(in_pool.iter().all(|p| !p));
        add_confident(&logits, 5, &mut in_pool, &mut labels, &mut labeled);
        assert_eq!(labeled.len(), 6);
    }
}
