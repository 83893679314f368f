use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::adversarial::{AdvTrainConfig, AttackConfig, AttackMode};
use crate::error::{Error, Result};
use crate::nn::TrainConfig;
use crate::ssl::{SslTaskConfig, TaskKind};

/// Environment variable that replaces the directory part of `dataset`.
pub const DATA_DIR_ENV: &str = "SSGCN_DATA_DIR";

pub const ALPHA2_GRID: [f64; 5] = [0.1, 0.3, 1.0, 3.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Plain,
    Pf,
    St,
    Mtl,
    Advt,
    AdvtSs,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Plain => "plain",
            Scheme::Pf => "pf",
            Scheme::St => "st",
            Scheme::Mtl => "mtl",
            Scheme::Advt => "advt",
            Scheme::AdvtSs => "advt_ss",
        }
    }

    pub fn needs_task(self) -> bool {
        matches!(self, Scheme::Pf | Scheme::Mtl | Scheme::AdvtSs)
    }

    pub fn is_adversarial(self) -> bool {
        matches!(self, Scheme::Advt | Scheme::AdvtSs)
    }
}

/// Self-training schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfTrainSettings {
    pub stages: usize,
    /// `None` means `⌈|train| / num_classes⌉`.
    pub additions_per_class: Option<usize>,
}

impl Default for SelfTrainSettings {
    fn default() -> Self {
        Self {
            stages: 3,
            additions_per_class: None,
        }
    }
}

/// Attack used for robustness evaluation and adversarial training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSettings {
    pub mode: AttackMode,
    pub n_perturb: usize,
    /// Number of test nodes attacked at evaluation; `None` attacks all.
    #[serde(default)]
    pub targets: Option<usize>,
    /// Directory of cached perturbation sets.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl AttackSettings {
    pub fn attack_config(&self) -> AttackConfig {
        AttackConfig::new(self.mode, self.n_perturb)
    }
}

/// Hyperparameter grids searched per seed by validation accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub alpha2: Vec<f64>,
    /// Multiples of the class count used as cluster or part counts.
    pub k_multiples: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            alpha2: ALPHA2_GRID.to_vec(),
            k_multiples: vec![1, 2, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SslSettings {
    k: Option<usize>,
    mask_fraction: f64,
    epsilon: f64,
    refinement_passes: usize,
    kmeans_iters: usize,
}

impl Default for SslSettings {
    fn default() -> Self {
        let d = SslTaskConfig::default();
        Self {
            k: d.k,
            mask_fraction: d.mask_fraction,
            epsilon: d.epsilon,
            refinement_passes: d.refinement_passes,
            kmeans_iters: d.kmeans_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PfSettings {
    pretrain_epochs: usize,
}

impl Default for PfSettings {
    fn default() -> Self {
        Self {
            pretrain_epochs: crate::train::PRETRAIN_EPOCHS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Seeds {
    List(Vec<u64>),
    /// Inclusive range written `"a..b"`.
    Range(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    dataset: PathBuf,
    scheme: Scheme,
    #[serde(default)]
    task: Option<String>,
    seeds: Seeds,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    train: TrainConfig,
    #[serde(default)]
    attack: Option<AttackSettings>,
    #[serde(default)]
    adv: Option<AdvTrainConfig>,
    #[serde(default)]
    ssl: Option<SslSettings>,
    #[serde(default)]
    st: Option<SelfTrainSettings>,
    #[serde(default)]
    pf: Option<PfSettings>,
    #[serde(default)]
    grid: Option<Grid>,
}

/// A validated experiment: one scheme on one dataset over a list of seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: PathBuf,
    pub scheme: Scheme,
    pub task: Option<SslTaskConfig>,
    pub train: TrainConfig,
    pub attack: Option<AttackSettings>,
    pub adv: AdvTrainConfig,
    pub self_training: SelfTrainSettings,
    pub pretrain_epochs: usize,
    /// Empty for schemes without a self-supervised task.
    pub grid: Grid,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// The flat key/value pairs the config was read from.
    pub echo: Map<String, Value>,
}

/// Expands `{"a.b": 1}` into `{"a": {"b": 1}}`.
pub fn unflatten(flat: &Map<String, Value>) -> Result<Value> {
    let mut root = Map::new();
    for (key, value) in flat {
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::InvalidConfig(format!("malformed key {key:?}")));
        }
        let mut node = &mut root;
        for part in &parts[..parts.len() - 1] {
            let entry = node.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
            node = entry
                .as_object_mut()
                .ok_or_else(|| Error::InvalidConfig(format!("key {key:?} conflicts with {part:?}")))?;
        }
        let leaf = parts[parts.len() - 1];
        if node.insert(leaf.to_string(), value.clone()).is_some() {
            return Err(Error::InvalidConfig(format!("duplicate key {key:?}")));
        }
    }
    Ok(Value::Object(root))
}

fn parse_seeds(seeds: Seeds) -> Result<Vec<u64>> {
    let list = match seeds {
        Seeds::List(list) => list,
        Seeds::Range(s) => {
            let bad = || Error::InvalidConfig(format!("seeds range {s:?} is not of the form a..b"));
            let (a, b) = s.split_once("..").ok_or_else(bad)?;
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if a > b {
                return Err(bad());
            }
            (a..=b).collect()
        }
    };
    if list.is_empty() {
        return Err(Error::InvalidConfig("seeds must not be empty".into()));
    }
    let mut sorted = list.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != list.len() {
        return Err(Error::InvalidConfig("seeds must be distinct".into()));
    }
    Ok(list)
}

fn parse_task(task: Option<&str>) -> Result<Option<TaskKind>> {
    Ok(match task.unwrap_or("none") {
        "none" => None,
        "clu" => Some(TaskKind::Clustering),
        "par" => Some(TaskKind::Partitioning),
        "comp" => Some(TaskKind::Completion),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown task {other:?}; expected none, clu, par or comp"
            )))
        }
    })
}

fn reject(present: bool, section: &str, scheme: Scheme) -> Result<()> {
    if present {
        return Err(Error::InvalidConfig(format!(
            "{section}.* settings do not apply to scheme {}",
            scheme.name()
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses a flat dotted-key JSON object. `default_name` names the
    /// outputs when the config has no `name` key.
    pub fn from_json(text: &str, default_name: &str) -> Result<Self> {
        let flat: Map<String, Value> = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("config is not a JSON object: {e}")))?;
        let raw: RawConfig = serde_json::from_value(unflatten(&flat)?)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let scheme = raw.scheme;
        let kind = parse_task(raw.task.as_deref())?;
        if scheme.needs_task() != kind.is_some() {
            return Err(Error::InvalidConfig(format!(
                "scheme {} {} a task",
                scheme.name(),
                if scheme.needs_task() { "requires" } else { "does not take" }
            )));
        }
        if scheme.is_adversarial() && raw.attack.is_none() {
            return Err(Error::InvalidConfig(format!(
                "scheme {} requires attack.mode and attack.n_perturb",
                scheme.name()
            )));
        }
        reject(raw.attack.is_some() && !scheme.is_adversarial() && scheme != Scheme::Plain, "attack", scheme)?;
        reject(raw.adv.is_some() && !scheme.is_adversarial(), "adv", scheme)?;
        reject(raw.ssl.is_some() && kind.is_none(), "ssl", scheme)?;
        reject(raw.st.is_some() && scheme != Scheme::St, "st", scheme)?;
        reject(raw.pf.is_some() && scheme != Scheme::Pf, "pf", scheme)?;
        reject(raw.grid.is_some() && kind.is_none(), "grid", scheme)?;
        raw.train.validate()?;

        let ssl = raw.ssl.unwrap_or_default();
        let task = kind.map(|kind| SslTaskConfig {
            kind,
            k: ssl.k,
            mask_fraction: ssl.mask_fraction,
            epsilon: ssl.epsilon,
            refinement_passes: ssl.refinement_passes,
            kmeans_iters: ssl.kmeans_iters,
        });
        let mut grid = match &task {
            Some(_) => raw.grid.unwrap_or_default(),
            None => Grid {
                alpha2: Vec::new(),
                k_multiples: Vec::new(),
            },
        };
        if let Some(t) = &task {
            let fixed_k = t.k.is_some() || t.kind == TaskKind::Completion;
            if fixed_k {
                grid.k_multiples.clear();
            }
            if scheme == Scheme::Pf {
                grid.alpha2.clear();
            }
            if grid.alpha2.iter().any(|a| !(*a >= 0.0)) || grid.k_multiples.contains(&0) {
                return Err(Error::InvalidConfig("grid values must be positive".into()));
            }
        }

        let dataset = match std::env::var_os(DATA_DIR_ENV) {
            Some(root) => {
                let leaf = raw
                    .dataset
                    .file_name()
                    .ok_or_else(|| Error::InvalidConfig("dataset path has no final component".into()))?;
                Path::new(&root).join(leaf)
            }
            None => raw.dataset,
        };
        Ok(Self {
            name: raw.name.unwrap_or_else(|| default_name.to_string()),
            dataset,
            scheme,
            task,
            train: raw.train,
            attack: raw.attack,
            adv: raw.adv.unwrap_or_default(),
            self_training: raw.st.unwrap_or_default(),
            pretrain_epochs: raw.pf.unwrap_or_default().pretrain_epochs,
            grid,
            seeds: parse_seeds(raw.seeds)?,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from(".")),
            echo: flat,
        })
    }

    /// Reads a config file; outputs are named after the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
        Self::from_json(&text, stem)
    }

    /// Short label such as `mtl-par` or `plain`.
    pub fn label(&self) -> String {
        match &self.task {
            Some(t) => format!("{}-{}", self.scheme.name(), t.kind.short_name()),
            None => self.scheme.name().to_string(),
        }
    }

    pub fn task_name(&self) -> &'static str {
        self.task.as_ref().map_or("none", |t| t.kind.short_name())
    }

    pub fn runs_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}.runs.jsonl", self.name))
    }

    pub fn aggregate_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}.agg.csv", self.name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json(json, "exp")
    }

    #[test]
    fn flat_keys_fill_nested_settings() {
        let cfg = parse(
            r#"{"dataset": "data/cora", "scheme": "mtl", "task": "par", "seeds": "1..50",
                "train.epochs": 10, "train.alpha2": 0.3, "ssl.epsilon": 0.1,
                "grid.alpha2": [1.0], "grid.k_multiples": [2]}"#,
        )
        .unwrap();
        assert_eq!(cfg.seeds, (1..=50).collect::<Vec<_>>());
        assert_eq!(cfg.train.epochs, 10);
        assert_eq!(cfg.train.alpha2, 0.3);
        assert_eq!(cfg.train.patience, 50);
        let task = cfg.task.as_ref().unwrap();
        assert_eq!((task.kind, task.epsilon), (TaskKind::Partitioning, 0.1));
        assert_eq!(cfg.grid.k_multiples, vec![2]);
        assert_eq!(cfg.label(), "mtl-par");
        assert_eq!(cfg.name, "exp");
        assert!(cfg.runs_path().ends_with("exp.runs.jsonl"));
    }

    #[test]
    fn default_grids_follow_the_task() {
        let par = parse(r#"{"dataset": "d", "scheme": "mtl", "task": "par", "seeds": [1]}"#).unwrap();
        assert_eq!(par.grid, Grid::default());
        let comp = parse(r#"{"dataset": "d", "scheme": "mtl", "task": "comp", "seeds": [1]}"#).unwrap();
        assert!(comp.grid.k_multiples.is_empty());
        let pf = parse(r#"{"dataset": "d", "scheme": "pf", "task": "clu", "seeds": [1], "ssl.k": 7}"#).unwrap();
        assert!(pf.grid.alpha2.is_empty() && pf.grid.k_multiples.is_empty());
        let plain = parse(r#"{"dataset": "d", "scheme": "plain", "seeds": [1]}"#).unwrap();
        assert!(plain.grid.alpha2.is_empty());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            r#"{"dataset": "d", "scheme": "mtl", "seeds": [1]}"#,
            r#"{"dataset": "d", "scheme": "plain", "task": "par", "seeds": [1]}"#,
            r#"{"dataset": "d", "scheme": "advt", "seeds": [1]}"#,
            r#"{"dataset": "d", "scheme": "st", "seeds": [1], "attack.mode": "links", "attack.n_perturb": 1}"#,
            r#"{"dataset": "d", "scheme": "plain", "seeds": [1], "st.stages": 2}"#,
            r#"{"dataset": "d", "scheme": "plain", "seeds": []}"#,
            r#"{"dataset": "d", "scheme": "plain", "seeds": [1, 1]}"#,
            r#"{"dataset": "d", "scheme": "plain", "seeds": "5..2"}"#,
            r#"{"dataset": "d", "scheme": "plain", "seeds": [1], "train.epoch": 3}"#,
            r#"{"dataset": "d", "scheme": "plain", "seeds": [1], "train.dropout": 1.5}"#,
            r#"{"dataset": "d", "scheme": "fancy", "seeds": [1]}"#,
            r#"{"dataset": "d", "scheme": "mtl", "task": "xyz", "seeds": [1]}"#,
            r#"{"dataset": "d", "scheme": "plain", "seeds": [1], "train": 1, "train.epochs": 2}"#,
            r#"[1, 2]"#,
        ];
        for json in bad {
            assert!(matches!(parse(json), Err(Error::InvalidConfig(_))), "{json}");
        }
    }

    #[test]
    fn adversarial_configs() {
        let cfg = parse(
            r#"{"dataset": "d", "scheme": "advt_ss", "task": "comp", "seeds": [1, 2],
                "attack.mode": "links_and_feats", "attack.n_perturb": 2, "adv.regen_period": 5}"#,
        )
        .unwrap();
        assert_eq!(cfg.adv.regen_period, 5);
        assert_eq!(cfg.attack.unwrap().attack_config(), AttackConfig::new(AttackMode::LinksAndFeats, 2));
        let plain = parse(
            r#"{"dataset": "d", "scheme": "plain", "seeds": [1], "attack.mode": "feats", "attack.n_perturb": 1}"#,
        )
        .unwrap();
        assert!(plain.attack.is_some());
    }
}
