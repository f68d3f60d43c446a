//! End-to-end model: the embedding pipeline (spatial → channel → pool +
//! position → temporal), the multi-task episode loss, SGD training, and
//! evaluation with confidence intervals.

use crate::attention::{
    channel_encode, spatial_encode, temporal_encode, temporal_tokenize, ChannelParams,
    MultiHeadParams, PosMode, PositionalEncoder,
};
use crate::data::{ClassId, DatasetManifest, FeatureDims, FeatureProvider};
use crate::episodes::{sample_episode, Episode, EpisodeItem};
use crate::error::{Error, Result};
use crate::gradcheck::{self, GradCheckReport};
use crate::metrics::{argmax_tie_low, class_scores, MetricKind};
use crate::rng::{derive_seed, Rng};
use crate::tape::{NodeId, ParamId, ParamSet, Tape};
use crate::tensor::{FeatureMap, FrameSequence, NdArray, Real};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Ablation switches; each ablation-study row is one combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Toggles {
    pub spatial_on: bool,
    pub channel_on: bool,
    pub temporal_on: bool,
    pub pos_on: bool,
    /// On: frame-wise matching. Off: mean-pooled baseline.
    pub framewise_on: bool,
    pub multitask_on: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles {
            spatial_on: true,
            channel_on: true,
            temporal_on: true,
            pos_on: true,
            framewise_on: true,
            multitask_on: true,
        }
    }
}

impl Toggles {
    pub fn all_off() -> Self {
        Toggles {
            spatial_on: false,
            channel_on: false,
            temporal_on: false,
            pos_on: false,
            framewise_on: false,
            multitask_on: false,
        }
    }

    /// Metric implied by the matching toggle.
    pub fn metric(&self) -> MetricKind {
        if self.framewise_on {
            MetricKind::FrameWise
        } else {
            MetricKind::MeanPooled
        }
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub heads: usize,
    pub reduction: usize,
    pub pos_mode: PosMode,
    pub toggles: Toggles,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            heads: 4,
            reduction: 4,
            pos_mode: PosMode::Sinusoidal,
            toggles: Toggles::default(),
        }
    }
}

/// Model structure. Parameters live in an external [`ParamSet`] (kept
/// separate so optimizers and finite-difference checks can perturb values
/// without reaching through the model).
#[derive(Debug, Clone)]
pub struct ItanModel<R> {
    pub dims: FeatureDims,
    pub cfg: ModelConfig,
    /// Sorted global class ids the semantic head classifies over.
    pub train_classes: Vec<ClassId>,
    spatial: MultiHeadParams,
    channel: ChannelParams,
    temporal: MultiHeadParams,
    pos: PositionalEncoder<R>,
    sem_w: ParamId,
    sem_b: ParamId,
}

/// Intermediate nodes of one embedded video.
#[derive(Debug, Clone, Copy)]
pub struct EmbedNodes {
    /// Channel-context output `(t, h, w, c)` (identity pass-through for
    /// disabled stages) — the semantic head pools this.
    pub context: NodeId,
    /// Final frame sequence `(t, c)`.
    pub sequence: NodeId,
}

impl<R: Real> ItanModel<R> {
    /// Builds the model and registers all parameters in `set`.
    /// Initialization draws from `derive_seed(seed, "model-init")` in a
    /// fixed order, so equal seeds give bitwise-equal parameters.
    pub fn init(
        dims: FeatureDims,
        cfg: ModelConfig,
        train_classes: Vec<ClassId>,
        seed: u64,
        set: &mut ParamSet<R>,
    ) -> Result<Self> {
        if train_classes.is_empty() {
            return Err(Error::Config("model needs at least one train class".into()));
        }
        let mut sorted = train_classes;
        sorted.sort_unstable();
        sorted.dedup();
        let mut rng = Rng::new(derive_seed(seed, "model-init"));
        let spatial = MultiHeadParams::new(set, "spatial", dims.n_c, cfg.heads, &mut rng)?;
        let channel = ChannelParams::new(set, "channel", dims.n_c, cfg.reduction, &mut rng)?;
        let temporal = MultiHeadParams::new(set, "temporal", dims.n_c, cfg.heads, &mut rng)?;
        let pos = PositionalEncoder::new(set, "pos", cfg.pos_mode, dims.n_t, dims.n_c, &mut rng);
        let sem_w = set.add(
            "semantic.w",
            crate::attention::glorot_uniform(&[dims.n_c, sorted.len()], &mut rng),
            true,
        );
        let sem_b = set.add("semantic.b", NdArray::zeros(&[sorted.len()]), true);
        Ok(ItanModel {
            dims,
            cfg,
            train_classes: sorted,
            spatial,
            channel,
            temporal,
            pos,
            sem_w,
            sem_b,
        })
    }

    /// Records the embedding pipeline for one video on the tape.
    pub fn embed_on_tape(
        &self,
        tape: &mut Tape<R>,
        set: &ParamSet<R>,
        fm: &FeatureMap<R>,
    ) -> Result<EmbedNodes> {
        if fm.n_t() != self.dims.n_t
            || fm.h_f() != self.dims.h_f
            || fm.w_f() != self.dims.w_f
            || fm.n_c() != self.dims.n_c
        {
            return Err(Error::DimensionMismatch {
                op: "embed_video",
                lhs: fm.values().shape().to_vec(),
                rhs: vec![self.dims.n_t, self.dims.h_f, self.dims.w_f, self.dims.n_c],
            });
        }
        let t = self.cfg.toggles;
        let mut x = tape.input(fm.values().clone());
        if t.spatial_on {
            x = spatial_encode(tape, set, &self.spatial, x)?;
        }
        if t.channel_on {
            x = channel_encode(tape, set, &self.channel, x)?;
        }
        let context = x;
        let mut z = temporal_tokenize(tape, x)?;
        if t.pos_on {
            z = self.pos.apply(tape, set, z)?;
        }
        if t.temporal_on {
            z = temporal_encode(tape, set, &self.temporal, z)?;
        }
        Ok(EmbedNodes {
            context,
            sequence: z,
        })
    }

    /// Pure evaluation path: embeds a video on a throwaway tape.
    pub fn embed_video(&self, set: &ParamSet<R>, fm: &FeatureMap<R>) -> Result<FrameSequence<R>> {
        let mut tape = Tape::new();
        let nodes = self.embed_on_tape(&mut tape, set, fm)?;
        FrameSequence::new(tape.value(nodes.sequence).clone())
    }

    /// Differentiable video-to-video similarity on the tape, matching the
    /// active metric toggle: frame-wise mean cosine or mean-pooled cosine.
    /// Returns a shape-`[1]` node.
    fn taped_similarity(&self, tape: &mut Tape<R>, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.cfg.toggles.framewise_on {
            let cosines = tape.cosine_rows(a, b)?; // (t)
            tape.reduce_mean(cosines, &[0])
        } else {
            let ma = tape.reduce_mean(a, &[0])?; // (c)
            let mb = tape.reduce_mean(b, &[0])?;
            let ma = tape.reshape(ma, &[1, self.dims.n_c])?;
            let mb = tape.reshape(mb, &[1, self.dims.n_c])?;
            tape.cosine_rows(ma, mb)
        }
    }

    /// Embeds every distinct video of an episode once (shared weights still
    /// accumulate gradients across all uses).
    fn embed_episode(
        &self,
        tape: &mut Tape<R>,
        set: &ParamSet<R>,
        episode: &Episode,
        provider: &FeatureProvider<R>,
    ) -> Result<HashMap<String, EmbedNodes>> {
        let mut embeds = HashMap::new();
        for item in episode.support.iter().chain(&episode.query) {
            if !embeds.contains_key(&item.video_id) {
                let nodes = self.embed_on_tape(tape, set, provider.get(&item.video_id)?)?;
                embeds.insert(item.video_id.clone(), nodes);
            }
        }
        Ok(embeds)
    }

    /// Meta loss: per query, class scores are the sums of
    /// query-support similarities per class, scaled by `tau`, then mean
    /// cross-entropy against the episode labels.
    fn meta_loss_on_tape(
        &self,
        tape: &mut Tape<R>,
        episode: &Episode,
        tau: f64,
        embeds: &HashMap<String, EmbedNodes>,
    ) -> Result<NodeId> {
        let mut rows = Vec::with_capacity(episode.query.len());
        let mut labels = Vec::with_capacity(episode.query.len());
        for q in &episode.query {
            let q_seq = embeds[&q.video_id].sequence;
            let mut per_class: Vec<Option<NodeId>> = vec![None; episode.way];
            for s in &episode.support {
                let sim = self.taped_similarity(tape, q_seq, embeds[&s.video_id].sequence)?;
                per_class[s.episode_label] = Some(match per_class[s.episode_label] {
                    None => sim,
                    Some(acc) => tape.add(acc, sim)?,
                });
            }
            let scores: Vec<NodeId> = per_class
                .into_iter()
                .map(|s| s.expect("episode invariants give K support per class"))
                .collect();
            let col = tape.stack(&scores)?; // (way, 1)
            rows.push(tape.reshape(col, &[1, episode.way])?);
            labels.push(q.episode_label);
        }
        let logits = tape.concat_rows(&rows)?;
        let scaled = tape.scale(logits, R::from_f64(tau))?;
        tape.cross_entropy(scaled, &labels)
    }

    /// Semantic loss: a linear head classifies the global average (over
    /// t, h, w) of the channel-context output among all train classes; the
    /// loss is mean CE over support plus mean CE over query.
    fn semantic_loss_on_tape(
        &self,
        tape: &mut Tape<R>,
        set: &ParamSet<R>,
        episode: &Episode,
        embeds: &HashMap<String, EmbedNodes>,
    ) -> Result<NodeId> {
        let term = |tape: &mut Tape<R>, items: &[EpisodeItem]| -> Result<NodeId> {
            let mut rows = Vec::with_capacity(items.len());
            let mut labels = Vec::with_capacity(items.len());
            for item in items {
                let pooled = tape.reduce_mean(embeds[&item.video_id].context, &[0, 1, 2])?;
                rows.push(tape.reshape(pooled, &[1, self.dims.n_c])?);
                labels.push(self.global_index(item.global_label)?);
            }
            let feats = tape.concat_rows(&rows)?;
            let w = tape.param(set, self.sem_w);
            let b = tape.param(set, self.sem_b);
            let logits = tape.linear(feats, w, b)?;
            tape.cross_entropy(logits, &labels)
        };
        let support_ce = term(tape, &episode.support)?;
        let query_ce = term(tape, &episode.query)?;
        tape.add(support_ce, query_ce)
    }

    /// Index of a global class id in the semantic head's output.
    fn global_index(&self, g: ClassId) -> Result<usize> {
        self.train_classes
            .binary_search(&g)
            .map_err(|_| Error::LabelOutOfRange {
                label: g as usize,
                classes: self.train_classes.len(),
            })
    }

    /// Total episode loss under a [`LossMode`]. The multitask toggle wins:
    /// with `multitask_on = false` the semantic term is skipped entirely and
    /// every mode degrades to meta-only.
    pub fn total_loss_on_tape(
        &self,
        tape: &mut Tape<R>,
        set: &ParamSet<R>,
        episode: &Episode,
        provider: &FeatureProvider<R>,
        mode: LossMode,
        tau: f64,
    ) -> Result<EpisodeLoss> {
        let embeds = self.embed_episode(tape, set, episode, provider)?;
        let meta = self.meta_loss_on_tape(tape, episode, tau, &embeds)?;
        let mode = if self.cfg.toggles.multitask_on {
            mode
        } else {
            LossMode::MetaOnly
        };
        match mode {
            LossMode::MetaOnly => Ok(EpisodeLoss {
                meta,
                sem: None,
                total: meta,
            }),
            LossMode::SemanticOnly => {
                let sem = self.semantic_loss_on_tape(tape, set, episode, &embeds)?;
                Ok(EpisodeLoss {
                    meta,
                    sem: Some(sem),
                    total: sem,
                })
            }
            LossMode::Joint { beta } => {
                if beta < 0.0 {
                    return Err(Error::Config(format!("beta must be >= 0, got {beta}")));
                }
                let sem = self.semantic_loss_on_tape(tape, set, episode, &embeds)?;
                // total = meta + beta*sem; at beta = 0 the scaled term is an
                // exact +0.0 (CE is finite), so L_all == L_meta bitwise.
                let scaled = tape.scale(sem, R::from_f64(beta))?;
                let total = tape.add(meta, scaled)?;
                Ok(EpisodeLoss {
                    meta,
                    sem: Some(sem),
                    total,
                })
            }
        }
    }
}

/// Which loss drives a training step (the two-stage paradigm runs
/// `SemanticOnly` episodes before switching to `MetaOnly`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    MetaOnly,
    SemanticOnly,
    Joint { beta: f64 },
}

/// Loss nodes of one episode (values still on the tape).
#[derive(Debug, Clone, Copy)]
pub struct EpisodeLoss {
    pub meta: NodeId,
    pub sem: Option<NodeId>,
    pub total: NodeId,
}

/// Loss values reported by one training step (pre-update).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub meta: f64,
    /// 0.0 when the semantic term was skipped.
    pub sem: f64,
    pub total: f64,
}

/// SGD with classical momentum: `v <- momentum*v + g; theta <- theta - lr*v`.
#[derive(Debug, Clone)]
pub struct SgdMomentum<R> {
    pub lr: R,
    pub momentum: R,
    velocity: Vec<NdArray<R>>,
}

impl<R: Real> SgdMomentum<R> {
    pub fn new(lr: f64, momentum: f64) -> Self {
        SgdMomentum {
            lr: R::from_f64(lr),
            momentum: R::from_f64(momentum),
            velocity: Vec::new(),
        }
    }

    /// Applies one update from the accumulated gradients.
    pub fn apply(&mut self, set: &mut ParamSet<R>) {
        if self.velocity.is_empty() {
            self.velocity = set
                .ids()
                .map(|id| NdArray::zeros(set.value(id).shape()))
                .collect();
        }
        let momentum = self.momentum;
        let lr = self.lr;
        for (i, id) in set.ids().enumerate() {
            if !set.get(id).trainable {
                continue;
            }
            let p = set.get_mut(id);
            let v = &mut self.velocity[i];
            for (vj, &gj) in v.data_mut().iter_mut().zip(p.grad.data()) {
                *vj = momentum * *vj + gj;
            }
            for (wj, &vj) in p.value.data_mut().iter_mut().zip(v.data()) {
                *wj -= lr * vj;
            }
        }
    }
}

/// One SGD step on one episode: zero grads → forward → backward → update.
/// Returns the pre-update loss values; a non-finite total aborts before
/// touching the parameters.
#[allow(clippy::too_many_arguments)]
pub fn train_step<R: Real>(
    model: &ItanModel<R>,
    set: &mut ParamSet<R>,
    opt: &mut SgdMomentum<R>,
    episode: &Episode,
    provider: &FeatureProvider<R>,
    mode: LossMode,
    tau: f64,
    episode_index: u64,
) -> Result<StepStats> {
    set.zero_grads();
    let mut tape = Tape::new();
    let loss = model.total_loss_on_tape(&mut tape, set, episode, provider, mode, tau)?;
    let total = tape.value(loss.total).data()[0].to_f64();
    if !total.is_finite() {
        return Err(Error::NonFiniteLoss {
            episode: episode_index,
            value: total,
        });
    }
    let stats = StepStats {
        meta: tape.value(loss.meta).data()[0].to_f64(),
        sem: loss
            .sem
            .map(|s| tape.value(s).data()[0].to_f64())
            .unwrap_or(0.0),
        total,
    };
    tape.backward(loss.total, set)?;
    opt.apply(set);
    Ok(stats)
}

/// C-way K-shot episode dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeShape {
    pub way: usize,
    pub shot: usize,
    pub queries_per_class: usize,
}

/// Sequential episodic training. Episodes are drawn from `rng`'s stream in
/// order; `mode_of(index)` picks each episode's loss (constant for
/// multitask, stage-switching for the two-stage paradigm). `episode_offset`
/// keeps indices contiguous across resumed stages.
#[allow(clippy::too_many_arguments)]
pub fn train_loop<R: Real>(
    model: &ItanModel<R>,
    set: &mut ParamSet<R>,
    opt: &mut SgdMomentum<R>,
    manifest: &DatasetManifest,
    provider: &FeatureProvider<R>,
    class_pool: &[ClassId],
    shape: EpisodeShape,
    episodes: u64,
    mode_of: &dyn Fn(u64) -> LossMode,
    tau: f64,
    rng: &mut Rng,
    episode_offset: u64,
) -> Result<Vec<StepStats>> {
    let mut log = Vec::with_capacity(episodes as usize);
    for e in 0..episodes {
        let index = episode_offset + e;
        let episode = sample_episode(
            manifest,
            class_pool,
            shape.way,
            shape.shot,
            shape.queries_per_class,
            rng,
        )?;
        let stats = train_step(
            model,
            set,
            opt,
            &episode,
            provider,
            mode_of(index),
            tau,
            index,
        )?;
        log.push(stats);
    }
    Ok(log)
}

/// Evaluation request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub runs: usize,
    pub episodes_per_run: usize,
    pub way: usize,
    pub shot: usize,
    pub queries_per_class: usize,
    /// None: follow the model's matching toggle.
    #[serde(default)]
    pub metric: Option<MetricKind>,
}

/// Evaluation outcome: per-run accuracies and the 95% interval half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub runs: Vec<f64>,
    pub episodes_per_run: usize,
    pub mean: f64,
    pub ci95: f64,
    pub metric: MetricKind,
    pub way: usize,
    pub shot: usize,
    pub queries_per_class: usize,
}

/// 1.96 · sample standard deviation / sqrt(n); 0 for fewer than two runs.
pub fn ci95_half_width(run_means: &[f64]) -> f64 {
    let n = run_means.len();
    if n < 2 {
        return 0.0;
    }
    let mean = run_means.iter().sum::<f64>() / n as f64;
    let var = run_means
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .sum::<f64>()
        / (n - 1) as f64;
    1.96 * var.sqrt() / (n as f64).sqrt()
}

/// Evaluates the model over seeded episode runs. Pure in (model, params,
/// manifest, seed): identical inputs give an identical report. Run r draws
/// its episodes from `derive_seed(seed, "eval-run/r")`.
pub fn evaluate<R: Real>(
    model: &ItanModel<R>,
    set: &ParamSet<R>,
    manifest: &DatasetManifest,
    provider: &FeatureProvider<R>,
    class_pool: &[ClassId],
    cfg: &EvalConfig,
    seed: u64,
) -> Result<EvalReport> {
    if cfg.runs == 0 || cfg.episodes_per_run == 0 {
        return Err(Error::Config(
            "evaluation needs at least one run and one episode".into(),
        ));
    }
    let metric = cfg.metric.unwrap_or_else(|| model.cfg.toggles.metric());
    // Embeddings depend only on (params, video): cache them across episodes.
    let mut cache: HashMap<String, FrameSequence<R>> = HashMap::new();
    let mut runs = Vec::with_capacity(cfg.runs);
    for r in 0..cfg.runs {
        let mut rng = Rng::new(derive_seed(seed, &format!("eval-run/{r}")));
        let mut acc_sum = 0.0;
        for _ in 0..cfg.episodes_per_run {
            let episode = sample_episode(
                manifest,
                class_pool,
                cfg.way,
                cfg.shot,
                cfg.queries_per_class,
                &mut rng,
            )?;
            for item in episode.support.iter().chain(&episode.query) {
                if !cache.contains_key(&item.video_id) {
                    let seq = model.embed_video(set, provider.get(&item.video_id)?)?;
                    cache.insert(item.video_id.clone(), seq);
                }
            }
            let support: Vec<(&FrameSequence<R>, usize)> = episode
                .support
                .iter()
                .map(|s| (&cache[&s.video_id], s.episode_label))
                .collect();
            let mut correct = 0usize;
            for q in &episode.query {
                let scores =
                    class_scores(&cache[&q.video_id], &support, episode.way, metric, &mut ())?;
                if argmax_tie_low(&scores) == q.episode_label {
                    correct += 1;
                }
            }
            acc_sum += correct as f64 / episode.query.len() as f64;
        }
        runs.push(acc_sum / cfg.episodes_per_run as f64);
    }
    let mean = runs.iter().sum::<f64>() / runs.len() as f64;
    let ci95 = ci95_half_width(&runs);
    Ok(EvalReport {
        runs,
        episodes_per_run: cfg.episodes_per_run,
        mean,
        ci95,
        metric,
        way: cfg.way,
        shot: cfg.shot,
        queries_per_class: cfg.queries_per_class,
    })
}

/// Gradient check through the whole pipeline (the "full loss" battery row):
/// a tiny two-head model on a 2-way episode of synthetic features at
/// n_t=3, H_f=W_f=2, n_c=8, 64-bit.
pub fn full_loss_grad_check(seed: u64) -> Result<GradCheckReport> {
    use crate::data::{synthetic_provider, SyntheticSpec};
    use crate::tensor::Precision;
    let spec = SyntheticSpec {
        num_class_pairs: 2,
        motifs_per_class: 2,
        n_t: 3,
        h_f: 2,
        w_f: 2,
        n_c: 8,
        noise_sigma: 0.05,
        temporal_jitter: true,
        spatial_jitter: true,
        samples_per_class: 3,
        seed: derive_seed(seed, "full-loss-data"),
    };
    let (manifest, provider) = synthetic_provider::<f64>(&spec, Precision::F64)?;
    let mut set = ParamSet::new();
    let cfg = ModelConfig {
        heads: 2,
        reduction: 4,
        pos_mode: PosMode::Sinusoidal,
        toggles: Toggles::default(),
    };
    let model = ItanModel::init(spec.dims(), cfg, manifest.class_ids(), seed, &mut set)?;
    let mut rng = Rng::new(derive_seed(seed, "full-loss-episode"));
    let episode = sample_episode(&manifest, &manifest.class_ids(), 2, 1, 1, &mut rng)?;
    let f = move |tape: &mut Tape<f64>, params: &ParamSet<f64>| {
        let loss = model.total_loss_on_tape(
            tape,
            params,
            &episode,
            &provider,
            LossMode::Joint { beta: 0.5 },
            10.0,
        )?;
        Ok(loss.total)
    };
    gradcheck::grad_check("full_loss", &mut set, &f, gradcheck::DEFAULT_EPS)
}
