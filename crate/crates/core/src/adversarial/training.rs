use serde::{Deserialize, Serialize};

use crate::adversarial::{
    apply_perturbations, fit_pseudo_labels, merge_perturbations, sample_attack_sets, AttackConfig,
    AttackContext, PerturbedGraph, Surrogate,
};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::nn::{GcnGrads, GcnParams, Head, TrainConfig};
use crate::rng::{self, streams};
use crate::ssl::{SslTask, SslTaskConfig};
use crate::train::{fit, ss_terms, HeadTerm, ModelInputs, Pass, RunResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdvTrainConfig {
    /// Epochs between perturbation regenerations.
    pub regen_period: usize,
    /// Size of each of the attacked and clean sets; `None` means
    /// `min(500, ⌊0.1 · |unlabelled|⌋)`.
    pub set_size: Option<usize>,
    /// Epochs to fit the first surrogate.
    pub surrogate_epochs: usize,
    /// Epochs to refit the surrogate, warm-started, at each regeneration.
    pub refit_epochs: usize,
}

impl Default for AdvTrainConfig {
    fn default() -> Self {
        Self {
            regen_period: 20,
            set_size: None,
            surrogate_epochs: 200,
            refit_epochs: 50,
        }
    }
}

/// Adversarial training: `α1·L_sup + α3·L_adv`, where `L_adv` is the
/// cross-entropy against pseudo-labels of the attacked and clean node sets
/// on the perturbed graph.
pub fn adversarial_train(
    ds: &Dataset,
    cfg: &TrainConfig,
    atk: &AttackConfig,
    adv: &AdvTrainConfig,
) -> Result<(GcnParams, RunResult)> {
    run(ds, cfg, atk, adv, None)
}

/// Adversarial training with a self-supervised task rebuilt from the
/// perturbed graph at every regeneration: `α1·L_sup + α2·L_ss + α3·L_adv`.
pub fn adversarial_train_ss(
    ds: &Dataset,
    task: &SslTaskConfig,
    cfg: &TrainConfig,
    atk: &AttackConfig,
    adv: &AdvTrainConfig,
) -> Result<(GcnParams, RunResult)> {
    run(ds, cfg, atk, adv, Some(task))
}

struct Round {
    graph: PerturbedGraph,
    task: Option<SslTask>,
}

#[allow(clippy::too_many_arguments)]
fn regenerate(
    ds: &Dataset,
    inputs: &ModelInputs,
    cfg: &TrainConfig,
    atk: &AttackConfig,
    surrogate: &Surrogate,
    targets: &[usize],
    labels: &[usize],
    ss: Option<&SslTaskConfig>,
    round: u64,
) -> Result<Round> {
    let ctx = AttackContext::new(&ds.graph, &ds.features, surrogate, cfg.normalize_features)?;
    let mut perturbations = ctx.attack_all(targets, labels, atk)?;
    let dropped = merge_perturbations(&mut perturbations);
    if dropped > 0 {
        log::debug!("dropped {dropped} duplicate edge flips in round {round}");
    }
    let graph = apply_perturbations(ds, &inputs.adj, cfg.normalize_features, &perturbations)?;
    let task = ss
        .map(|c| {
            c.build(
                &graph.raw_features,
                &graph.inputs.x,
                &graph.graph,
                ds.num_classes,
                cfg.seed.wrapping_add(round),
            )
        })
        .transpose()?;
    Ok(Round { graph, task })
}

fn run(
    ds: &Dataset,
    cfg: &TrainConfig,
    atk: &AttackConfig,
    adv: &AdvTrainConfig,
    ss: Option<&SslTaskConfig>,
) -> Result<(GcnParams, RunResult)> {
    cfg.validate()?;
    let inputs = ModelInputs::new(ds, cfg);
    let pseudo = fit_pseudo_labels(ds, cfg)?;
    let unlabeled = ds.unlabeled_nodes();
    let size = adv.set_size.unwrap_or((unlabeled.len() / 10).min(500));
    let (clean, attacked) = sample_attack_sets(&unlabeled, size, size, cfg.seed)?;
    let mut adv_nodes: Vec<usize> = clean.iter().chain(&attacked).copied().collect();
    adv_nodes.sort_unstable();

    let mut surrogate = Surrogate::new(ds.feature_dim(), ds.num_classes, cfg.seed);
    surrogate.distill(&pseudo.model, &inputs, adv.surrogate_epochs)?;
    let regen = |surrogate: &Surrogate, round: u64| {
        regenerate(ds, &inputs, cfg, atk, surrogate, &attacked, &pseudo.labels, ss, round)
    };
    let mut round = regen(&surrogate, 0)?;

    let ss_dim = round.task.as_ref().map(|t| t.output_dim);
    let mut params = GcnParams::init(ds.feature_dim(), cfg.hidden_dim, ds.num_classes, ss_dim, cfg.seed);
    let mut sup_rng = rng::stream(cfg.seed, streams::DROPOUT_SUPERVISED);
    let mut adv_rng = rng::stream(cfg.seed, streams::DROPOUT_ADV);
    let mut names = vec!["supervised", "adversarial"];
    if ss.is_some() {
        names.push("self_supervised");
    }
    let period = adv.regen_period.max(1);

    let result = fit(ds, &inputs, &mut params, cfg, &names, |epoch, p| {
        if epoch > 0 && epoch % period == 0 {
            surrogate.distill(p, &inputs, adv.refit_epochs)?;
            round = regen(&surrogate, (epoch / period) as u64)?;
        }
        let mut grads = GcnGrads::zeros_like(p);
        let mut losses = Pass {
            x: &inputs.x,
            adj: &inputs.adj,
            dropout: Some((cfg.dropout, &mut sup_rng)),
            terms: vec![(
                HeadTerm::Classify {
                    head: Head::Target,
                    labels: &ds.labels,
                    nodes: &ds.splits.train,
                },
                cfg.alpha1,
            )],
        }
        .accumulate(p, &mut grads)?;

        let perturbed = &round.graph.inputs;
        let mut terms = vec![(
            HeadTerm::Classify {
                head: Head::Target,
                labels: &pseudo.labels,
                nodes: &adv_nodes,
            },
            cfg.alpha3,
        )];
        let shared = round.task.as_ref().filter(|t| t.shares_input());
        if let Some(task) = shared {
            terms.push(ss_terms(task, cfg.alpha2));
        }
        losses.extend(
            Pass {
                x: &perturbed.x,
                adj: &perturbed.adj,
                dropout: Some((cfg.dropout, &mut adv_rng)),
                terms,
            }
            .accumulate(p, &mut grads)?,
        );
        if let Some(task) = round.task.as_ref().filter(|t| !t.shares_input()) {
            losses.extend(
                Pass {
                    x: task.input(&perturbed.x),
                    adj: &perturbed.adj,
                    dropout: None,
                    terms: vec![ss_terms(task, cfg.alpha2)],
                }
                .accumulate(p, &mut grads)?,
            );
        }
        Ok((grads, losses))
    })?;
    Ok((params, result))
}
