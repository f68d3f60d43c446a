//! Run configuration: one JSON document drives every subcommand, with
//! dotted-path `--set` overrides applied through the serde value tree so
//! unknown keys are rejected instead of silently ignored.

use crate::bench::{CostModel, StageKind};
use crate::data::SyntheticSpec;
use crate::error::{Error, Result};
use crate::metrics::MetricKind;
use crate::model::{EpisodeShape, EvalConfig, LossMode, ModelConfig};
use crate::tensor::Precision;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Where episode classes come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Train, val, and test all draw from every class (the twin-class
    /// synthetic study trains and tests on the same 8 classes).
    Shared,
    /// Disjoint class split with the given sizes, shuffled by the run seed.
    Disjoint {
        train: usize,
        val: usize,
        test: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Manifest path; None synthesizes features in memory from `synthetic`.
    pub manifest: Option<String>,
    pub split: SplitMode,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            manifest: None,
            split: SplitMode::Shared,
        }
    }
}

/// Which training paradigm schedules the losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    /// Joint `L_meta + beta * L_sem` on every episode.
    Multitask,
    /// Semantic-only warm-up, then meta-only.
    TwoStage { stage1_episodes: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub episodes: u64,
    pub way: usize,
    pub shot: usize,
    pub queries_per_class: usize,
    pub beta: f64,
    pub tau: f64,
    pub paradigm: Paradigm,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.05,
            momentum: 0.9,
            episodes: 2000,
            way: 5,
            shot: 1,
            queries_per_class: 3,
            beta: 1.0,
            tau: 10.0,
            paradigm: Paradigm::Multitask,
        }
    }
}

impl TrainConfig {
    pub fn shape(&self) -> EpisodeShape {
        EpisodeShape {
            way: self.way,
            shot: self.shot,
            queries_per_class: self.queries_per_class,
        }
    }

    /// Loss mode of episode `index` under the configured paradigm.
    pub fn mode_of(&self, index: u64) -> LossMode {
        match self.paradigm {
            Paradigm::Multitask => LossMode::Joint { beta: self.beta },
            Paradigm::TwoStage { stage1_episodes } => {
                if index < stage1_episodes {
                    LossMode::SemanticOnly
                } else {
                    LossMode::MetaOnly
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub runs: usize,
    pub episodes_per_run: usize,
    pub way: usize,
    pub shot: usize,
    pub queries_per_class: usize,
    /// Checkpoint to restore before evaluating (None evaluates as-initialized).
    pub checkpoint: Option<String>,
    /// Metric override; None follows the model's matching toggle.
    pub metric: Option<MetricKind>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            runs: 5,
            episodes_per_run: 100,
            way: 5,
            shot: 1,
            queries_per_class: 3,
            checkpoint: None,
            metric: None,
        }
    }
}

impl EvalSection {
    pub fn to_eval_config(&self) -> EvalConfig {
        EvalConfig {
            runs: self.runs,
            episodes_per_run: self.episodes_per_run,
            way: self.way,
            shot: self.shot,
            queries_per_class: self.queries_per_class,
            metric: self.metric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub t_values: Vec<usize>,
    pub cost_model: CostModel,
    pub stages: Vec<StageKind>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            t_values: vec![8, 16, 32, 64, 128],
            cost_model: CostModel {
                way: 5,
                shot: 1,
                queries: 25,
                feature_dim: 64,
                frames: 8,
            },
            stages: vec![
                StageKind::ImplicitPairwise,
                StageKind::ExplicitDtwPairwise,
                StageKind::TemporalAttentionOneTime,
            ],
        }
    }
}

/// The complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed for training, splitting, and evaluation streams.
    pub seed: u64,
    pub precision: Precision,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalSection,
    /// Generator parameters for `gen-data` and for in-memory features;
    /// carries its own seed so datasets stay fixed while run seeds vary.
    pub synthetic: SyntheticSpec,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            precision: Precision::F32,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
            synthetic: crate::data::default_synthetic_spec(1),
            bench: BenchConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.train;
        if !t.lr.is_finite() || t.lr <= 0.0 {
            return Err(Error::Config(format!("train.lr must be > 0, got {}", t.lr)));
        }
        if !(0.0..1.0).contains(&t.momentum) {
            return Err(Error::Config(format!(
                "train.momentum must be in [0, 1), got {}",
                t.momentum
            )));
        }
        if !t.beta.is_finite() || t.beta < 0.0 {
            return Err(Error::Config(format!(
                "train.beta must be >= 0, got {}",
                t.beta
            )));
        }
        if !t.tau.is_finite() || t.tau <= 0.0 {
            return Err(Error::Config(format!(
                "train.tau must be > 0, got {}",
                t.tau
            )));
        }
        if t.way == 0 || t.shot == 0 || t.queries_per_class == 0 {
            return Err(Error::Config(
                "train.way, train.shot, and train.queries_per_class must be >= 1".into(),
            ));
        }
        if let Paradigm::TwoStage { stage1_episodes } = t.paradigm {
            if stage1_episodes > t.episodes {
                return Err(Error::Config(format!(
                    "two-stage warm-up ({stage1_episodes}) exceeds train.episodes ({})",
                    t.episodes
                )));
            }
        }
        if self.eval.way == 0 || self.eval.shot == 0 || self.eval.queries_per_class == 0 {
            return Err(Error::Config(
                "eval.way, eval.shot, and eval.queries_per_class must be >= 1".into(),
            ));
        }
        if let SplitMode::Disjoint { train, val, test } = self.data.split {
            if train == 0 || val == 0 || test == 0 {
                return Err(Error::Config(
                    "disjoint split sizes must all be >= 1".into(),
                ));
            }
        }
        self.bench.cost_model.validate()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Applies `key=value` overrides addressed by dotted paths
/// (`train.lr=0.01`, `model.toggles.framewise_on=false`,
/// `bench.t_values=[8,16,32,64]`). Keys must already exist; values parse as
/// JSON, falling back to a bare string (so `data.manifest=out/m.json` works
/// unquoted).
pub fn apply_overrides(cfg: &RunConfig, overrides: &[String]) -> Result<RunConfig> {
    let mut tree = serde_json::to_value(cfg).expect("config serializes");
    for spec in overrides {
        let (path, raw) = spec.split_once('=').ok_or_else(|| {
            Error::Config(format!("override {spec:?} is not of the form key=value"))
        })?;
        let value: serde_json::Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        set_path(&mut tree, path, value)?;
    }
    let cfg: RunConfig = serde_json::from_value(tree)
        .map_err(|e| Error::Config(format!("override produced an invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Walks `a.b.c` through objects (and numeric indices through arrays) and
/// replaces the addressed value. Every segment must already exist.
fn set_path(tree: &mut serde_json::Value, path: &str, value: serde_json::Value) -> Result<()> {
    let mut cursor = tree;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        let missing = || Error::Config(format!("unknown config key {path:?} (at {seg:?})"));
        match cursor {
            serde_json::Value::Object(map) => {
                // Enum payloads appear as {"variant": {...}}; descend into a
                // sole variant object transparently so `train.paradigm.
                // two_stage.stage1_episodes` is not needed for common cases.
                let entry = map.get_mut(*seg).ok_or_else(missing)?;
                if last {
                    *entry = value;
                    return Ok(());
                }
                cursor = entry;
            }
            serde_json::Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| missing())?;
                let entry = items.get_mut(idx).ok_or_else(missing)?;
                if last {
                    *entry = value;
                    return Ok(());
                }
                cursor = entry;
            }
            _ => return Err(missing()),
        }
    }
    Err(Error::Config(format!("empty override path {path:?}")))
}
