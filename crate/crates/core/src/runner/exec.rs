use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversarial::{
    adversarial_train, adversarial_train_ss, evaluate_perturbed, generate_attacks, load_perturbations,
    save_perturbations, AttackConfig, Perturbation,
};
use crate::dataset::{load_dataset, Dataset, Split};
use crate::error::{Error, Result};
use crate::nn::{GcnParams, TrainConfig};
use crate::rng::{self, streams};
use crate::runner::config::{ExperimentConfig, Scheme};
use crate::ssl::{SslTaskConfig, TaskKind};
use crate::train::{pretrain_finetune_with, self_train, train_multitask, train_supervised, RunResult};

/// Outcome of one seed. Failed seeds carry `error` and no accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub scheme: String,
    pub task: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_val_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attacked_accuracy: Option<f64>,
    /// Selected self-supervised weight, for schemes with a task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
    /// Selected cluster or part count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One CSV row summarising an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub name: String,
    pub dataset: String,
    pub scheme: String,
    pub task: String,
    pub completed: usize,
    pub failed: usize,
    pub mean: f64,
    pub std: f64,
    pub attacked_mean: Option<f64>,
    pub attacked_std: Option<f64>,
    pub wall_time_s: f64,
    /// The experiment config as flat JSON.
    pub config: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    /// Records in seed order.
    pub records: Vec<RunRecord>,
    pub row: AggregateRow,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; undefined below two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Summary row computed from records alone, apart from timing and echo.
pub fn aggregate(cfg: &ExperimentConfig, dataset: &str, records: &[RunRecord], wall_time_s: f64) -> AggregateRow {
    let acc: Vec<f64> = records.iter().filter_map(|r| r.accuracy).collect();
    let attacked: Vec<f64> = records.iter().filter_map(|r| r.attacked_accuracy).collect();
    let has_attack = cfg.attack.is_some();
    AggregateRow {
        name: cfg.name.clone(),
        dataset: dataset.to_string(),
        scheme: cfg.scheme.name().to_string(),
        task: cfg.task_name().to_string(),
        completed: acc.len(),
        failed: records.len() - acc.len(),
        mean: mean(&acc),
        std: sample_std(&acc),
        attacked_mean: has_attack.then(|| mean(&attacked)),
        attacked_std: has_attack.then(|| sample_std(&attacked)),
        wall_time_s,
        config: serde_json::Value::Object(cfg.echo.clone()).to_string(),
    }
}

/// Test nodes attacked during evaluation, drawn per seed.
pub fn evaluation_targets(ds: &Dataset, count: Option<usize>, seed: u64) -> Vec<usize> {
    let mut test = ds.splits.get(Split::Test).to_vec();
    if let Some(n) = count.filter(|&n| n < test.len()) {
        test.shuffle(&mut rng::stream(seed, streams::EVAL_TARGETS));
        test.truncate(n);
        test.sort_unstable();
    }
    test
}

/// Cache file for the perturbations of one model under one attack.
pub fn attack_cache_path(
    dir: &Path,
    dataset: &str,
    params: &GcnParams,
    atk: &AttackConfig,
    targets: &[usize],
    seed: u64,
) -> PathBuf {
    let key = serde_json::json!({
        "dataset": dataset,
        "model": params.checksum(),
        "attack": atk,
        "targets": targets,
        "seed": seed,
    });
    let digest = Sha256::digest(key.to_string().as_bytes());
    dir.join(format!("{dataset}-{}.json", &hex::encode(digest)[..16]))
}

/// Perturbations for `targets`, read from the cache when present and
/// written to it otherwise.
pub fn cached_attacks(
    cache_dir: Option<&Path>,
    params: &GcnParams,
    ds: &Dataset,
    cfg: &TrainConfig,
    atk: &AttackConfig,
    targets: &[usize],
    seed: u64,
) -> Result<Vec<Perturbation>> {
    let Some(dir) = cache_dir else {
        return generate_attacks(params, ds, cfg, atk, targets, seed);
    };
    let path = attack_cache_path(dir, &ds.name, params, atk, targets, seed);
    if path.exists() {
        let perts = load_perturbations(&path)?;
        let cached: Vec<usize> = perts.iter().map(|p| p.target).collect();
        if cached == targets && perts.iter().all(|p| p.respects(atk.n_perturb)) {
            return Ok(perts);
        }
        log::warn!("{}: stale attack cache entry, regenerating", path.display());
    }
    let perts = generate_attacks(params, ds, cfg, atk, targets, seed)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_perturbations(&path, &perts)?;
    Ok(perts)
}

struct Trained {
    params: GcnParams,
    result: RunResult,
    alpha2: Option<f64>,
    k: Option<usize>,
}

fn train_once(cfg: &ExperimentConfig, ds: &Dataset, train: &TrainConfig, task: Option<&SslTaskConfig>) -> Result<(GcnParams, RunResult)> {
    let seed = train.seed;
    let build = || -> Result<_> {
        let t = task.expect("validated config has a task");
        t.build(&ds.features, &ds.model_features(train.normalize_features), &ds.graph, ds.num_classes, seed)
    };
    let atk = || cfg.attack.as_ref().expect("validated config has an attack").attack_config();
    match cfg.scheme {
        Scheme::Plain => train_supervised(ds, train),
        Scheme::Pf => pretrain_finetune_with(ds, &build()?, train, cfg.pretrain_epochs),
        Scheme::St => {
            let per_class = cfg
                .self_training
                .additions_per_class
                .unwrap_or_else(|| ds.splits.train.len().div_ceil(ds.num_classes));
            self_train(ds, train, cfg.self_training.stages, per_class)
        }
        Scheme::Mtl => train_multitask(ds, &build()?, train),
        Scheme::Advt => adversarial_train(ds, train, &atk(), &cfg.adv),
        Scheme::AdvtSs => adversarial_train_ss(ds, task.expect("task"), train, &atk(), &cfg.adv),
    }
}

/// Trains every grid point for one seed and keeps the one with the best
/// validation accuracy; ties keep the earlier point.
fn train_selected(cfg: &ExperimentConfig, ds: &Dataset, seed: u64) -> Result<Trained> {
    let base = cfg.train.clone().with_seed(seed);
    let alphas: Vec<Option<f64>> = if cfg.grid.alpha2.is_empty() {
        vec![None]
    } else {
        cfg.grid.alpha2.iter().map(|&a| Some(a)).collect()
    };
    let ks: Vec<Option<usize>> = if cfg.grid.k_multiples.is_empty() {
        vec![None]
    } else {
        cfg.grid.k_multiples.iter().map(|&m| Some(m * ds.num_classes)).collect()
    };
    let mut best: Option<Trained> = None;
    for &k in &ks {
        for &alpha2 in &alphas {
            let train = TrainConfig {
                alpha2: alpha2.unwrap_or(base.alpha2),
                ..base.clone()
            };
            let task = cfg.task.clone().map(|t| SslTaskConfig { k: k.or(t.k), ..t });
            let (params, result) = train_once(cfg, ds, &train, task.as_ref())?;
            if best.as_ref().is_none_or(|b| result.best_val_accuracy > b.result.best_val_accuracy) {
                let uses_alpha2 = matches!(cfg.scheme, Scheme::Mtl | Scheme::AdvtSs);
                best = Some(Trained {
                    params,
                    result,
                    alpha2: uses_alpha2.then_some(train.alpha2),
                    k: task
                        .as_ref()
                        .filter(|t| t.kind != TaskKind::Completion)
                        .map(|t| t.k.unwrap_or(ds.num_classes)),
                });
            }
        }
    }
    Ok(best.expect("grid has at least one point"))
}

/// Trains and evaluates one seed.
pub fn run_seed(cfg: &ExperimentConfig, ds: &Dataset, seed: u64) -> Result<RunRecord> {
    let trained = train_selected(cfg, ds, seed)?;
    let train = cfg.train.clone().with_seed(seed);
    let attacked_accuracy = match &cfg.attack {
        Some(settings) => {
            let targets = evaluation_targets(ds, settings.targets, seed);
            let atk = settings.attack_config();
            let dir = settings.cache_dir.as_deref();
            let perts = cached_attacks(dir, &trained.params, ds, &train, &atk, &targets, seed)?;
            Some(evaluate_perturbed(&trained.params, ds, &train, &perts)?)
        }
        None => None,
    };
    Ok(RunRecord {
        dataset: ds.name.clone(),
        scheme: cfg.scheme.name().to_string(),
        task: cfg.task_name().to_string(),
        seed,
        accuracy: Some(trained.result.test_accuracy),
        best_epoch: Some(trained.result.best_epoch),
        best_val_accuracy: Some(trained.result.best_val_accuracy),
        attacked_accuracy,
        alpha2: trained.alpha2,
        k: trained.k,
        error: None,
    })
}

fn failed(cfg: &ExperimentConfig, ds: &Dataset, seed: u64, e: &Error) -> RunRecord {
    log::warn!("{} seed {seed} failed: {e}", cfg.name);
    RunRecord {
        dataset: ds.name.clone(),
        scheme: cfg.scheme.name().to_string(),
        task: cfg.task_name().to_string(),
        seed,
        accuracy: None,
        best_epoch: None,
        best_val_accuracy: None,
        attacked_accuracy: None,
        alpha2: None,
        k: None,
        error: Some(e.to_string()),
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {jobs} workers: {e}")))
}

/// Runs every seed on a pool of `jobs` workers. Records come back in seed
/// order whatever order the runs finish in.
pub fn run_seeds(cfg: &ExperimentConfig, ds: &Dataset, jobs: usize) -> Result<Vec<RunRecord>> {
    Ok(pool(jobs)?.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| run_seed(cfg, ds, seed).unwrap_or_else(|e| failed(cfg, ds, seed, &e)))
            .collect()
    }))
}

/// Loads the dataset, runs all seeds and writes `<name>.runs.jsonl` and
/// `<name>.agg.csv` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<AggregateReport> {
    let start = Instant::now();
    let ds = load_dataset(&cfg.dataset)?;
    let records = run_seeds(cfg, &ds, jobs)?;
    let row = aggregate(cfg, &ds.name, &records, start.elapsed().as_secs_f64());
    if row.failed > 0 {
        log::warn!(
            "{}: {} of {} seeds failed; aggregating over {} completed",
            cfg.name,
            row.failed,
            records.len(),
            row.completed
        );
    }
    write_outputs(cfg, &records, &row)?;
    Ok(AggregateReport { records, row })
}

pub fn write_outputs(cfg: &ExperimentConfig, records: &[RunRecord], row: &AggregateRow) -> Result<()> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = cfg.runs_path();
    let mut out = Vec::new();
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::json(&path, e))?;
        writeln!(out, "{line}").expect("writing to memory");
    }
    fs::write(&path, out).map_err(|e| Error::io(&path, e))?;

    let path = cfg.aggregate_path();
    let csv_err = |e: csv::Error| Error::InvalidDataset(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.serialize(row).map_err(csv_err)?;
    w.flush().map_err(|e| Error::io(&path, e))
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::json(path, e)))
        .collect()
}

/// Trains each seed's model and stores its evaluation perturbations in
/// `attack.cache_dir`. Returns the cache files in seed order.
pub fn build_attack_cache(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<PathBuf>> {
    let settings = cfg
        .attack
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("attack-cache needs attack.mode and attack.n_perturb".into()))?;
    let dir = settings
        .cache_dir
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("attack-cache needs attack.cache_dir".into()))?;
    let ds = load_dataset(&cfg.dataset)?;
    let atk = settings.attack_config();
    pool(jobs)?.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                let trained = train_selected(cfg, &ds, seed)?;
                let targets = evaluation_targets(&ds, settings.targets, seed);
                let train = cfg.train.clone().with_seed(seed);
                cached_attacks(Some(dir), &trained.params, &ds, &train, &atk, &targets, seed)?;
                Ok(attack_cache_path(dir, &ds.name, &trained.params, &atk, &targets, seed))
            })
            .collect()
    })
}
