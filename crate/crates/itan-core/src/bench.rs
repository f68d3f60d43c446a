//! Complexity harness: analytic operation counts for the two matching
//! methods, a multiply-accumulate census over the real kernels, and wall-
//! clock scaling measurements with fitted log-log slopes.

use crate::error::{Error, Result};
use crate::metrics::{dtw_similarity_counted, frame_similarity_counted, MacCensus, MacSink};
use crate::rng::{derive_seed, Rng};
use crate::tape::{matmul_kernel, softmax_kernel, transpose_kernel};
use crate::tensor::{FrameSequence, NdArray};
use serde::{Deserialize, Serialize};
use std::hint::black_box;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

/// Episode dimensions the cost formulas range over: N-way, K-shot,
/// Q queries total, C-dimensional frame features, T frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub way: usize,
    pub shot: usize,
    pub queries: usize,
    pub feature_dim: usize,
    pub frames: usize,
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if self.way == 0
            || self.shot == 0
            || self.queries == 0
            || self.feature_dim == 0
            || self.frames == 0
        {
            return Err(Error::Bench(format!(
                "cost model fields must all be >= 1: {self:?}"
            )));
        }
        Ok(())
    }

    fn with_frames(self, frames: usize) -> CostModel {
        CostModel { frames, ..self }
    }
}

/// The two matching strategies whose costs are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    /// One-time temporal attention per video, then linear frame-wise
    /// comparison per pair.
    Implicit,
    /// Dense quadratic frame comparison per support-query pair.
    ExplicitDtw,
}

/// Analytic operation counts:
/// implicit `(NK+Q)·C·T² + NK·Q·C·T`, explicit `NK·Q·C·T²`.
pub fn analytic_match_cost(method: MatchMethod, cm: &CostModel) -> u64 {
    let n = cm.way as u64;
    let k = cm.shot as u64;
    let q = cm.queries as u64;
    let c = cm.feature_dim as u64;
    let t = cm.frames as u64;
    match method {
        MatchMethod::Implicit => (n * k + q) * c * t * t + n * k * q * c * t,
        MatchMethod::ExplicitDtw => n * k * q * c * t * t,
    }
}

/// Scaled dot-product attention core on pre-projected `q, k, v: (T, C)`,
/// recording its multiply-accumulates: `QKᵀ` and `αV` are `T²·C` each
/// (projections are deliberately excluded; they belong to feature
/// enrichment, not the alignment stage).
pub fn attention_core<S: MacSink>(
    q: &NdArray<f64>,
    k: &NdArray<f64>,
    v: &NdArray<f64>,
    sink: &mut S,
) -> NdArray<f64> {
    let t = q.shape()[0] as u64;
    let c = q.shape()[1] as u64;
    let kt = transpose_kernel(k);
    let scores = matmul_kernel(q, &kt);
    sink.record(t * t * c);
    let alpha = softmax_kernel(&scores, 1);
    let out = matmul_kernel(&alpha, v);
    sink.record(t * t * c);
    out
}

/// Random frame sequences standing in for one episode's videos:
/// `NK` supports followed by `Q` queries.
fn episode_sequences(cm: &CostModel, seed: u64) -> Vec<FrameSequence<f64>> {
    let mut rng = Rng::new(seed);
    let count = cm.way * cm.shot + cm.queries;
    (0..count)
        .map(|_| {
            FrameSequence::new(NdArray::from_fn(&[cm.frames, cm.feature_dim], |_| {
                rng.gaussian()
            }))
            .expect("rank-2 by construction")
        })
        .collect()
}

/// Runs one full matching pass over synthetic data and returns the MAC
/// census. Implicit = one-time attention per video + frame-wise per pair;
/// explicit = DTW per pair.
pub fn census_match_cost(method: MatchMethod, cm: &CostModel, seed: u64) -> Result<u64> {
    cm.validate()?;
    let videos = episode_sequences(cm, seed);
    let nk = cm.way * cm.shot;
    let mut census = MacCensus::default();
    match method {
        MatchMethod::Implicit => {
            for v in &videos {
                black_box(attention_core(
                    v.values(),
                    v.values(),
                    v.values(),
                    &mut census,
                ));
            }
            for s in &videos[..nk] {
                for q in &videos[nk..] {
                    black_box(frame_similarity_counted(q, s, &mut census)?);
                }
            }
        }
        MatchMethod::ExplicitDtw => {
            for s in &videos[..nk] {
                for q in &videos[nk..] {
                    black_box(dtw_similarity_counted(q, s, &mut census)?);
                }
            }
        }
    }
    Ok(census.macs)
}

/// An isolatable timed stage of the matching pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    /// Frame-wise similarity over all NK·Q pairs: expect slope ~1 in T.
    ImplicitPairwise,
    /// DTW over all NK·Q pairs: expect slope ~2 in T.
    ExplicitDtwPairwise,
    /// Temporal attention core over all NK+Q videos: expect slope ~2 in T,
    /// but invoked (NK+Q) times instead of NK·Q times.
    TemporalAttentionOneTime,
}

impl StageKind {
    pub fn name(self) -> &'static str {
        match self {
            StageKind::ImplicitPairwise => "implicit_pairwise",
            StageKind::ExplicitDtwPairwise => "explicit_dtw_pairwise",
            StageKind::TemporalAttentionOneTime => "temporal_attention_one_time",
        }
    }

    /// Slope band the stage must land in.
    pub fn expected_slope(self) -> (f64, f64) {
        match self {
            StageKind::ImplicitPairwise => (0.7, 1.3),
            StageKind::ExplicitDtwPairwise => (1.7, 2.3),
            StageKind::TemporalAttentionOneTime => (1.7, 2.3),
        }
    }
}

/// One full pass of the stage body (the unit of repetition while timing).
fn run_stage(stage: StageKind, videos: &[FrameSequence<f64>], nk: usize) -> Result<f64> {
    let mut acc = 0.0;
    match stage {
        StageKind::ImplicitPairwise => {
            for s in &videos[..nk] {
                for q in &videos[nk..] {
                    acc += frame_similarity_counted(q, s, &mut ())?;
                }
            }
        }
        StageKind::ExplicitDtwPairwise => {
            for s in &videos[..nk] {
                for q in &videos[nk..] {
                    acc += dtw_similarity_counted(q, s, &mut ())?;
                }
            }
        }
        StageKind::TemporalAttentionOneTime => {
            for v in videos {
                let out = attention_core(v.values(), v.values(), v.values(), &mut ());
                acc += out.data()[0];
            }
        }
    }
    Ok(acc)
}

/// Scaling measurement of one stage across frame counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub stage: StageKind,
    pub sizes: Vec<usize>,
    /// Median wall time per stage pass, nanoseconds.
    pub median_ns: Vec<f64>,
    /// Least-squares slope of log(time) vs log(T).
    pub slope: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub repetitions: usize,
}

impl ScalingReport {
    /// CSV rows `size,median_ns,slope` under a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,median_ns,slope\n");
        for (t, ns) in self.sizes.iter().zip(&self.median_ns) {
            out.push_str(&format!("{t},{ns},{}\n", self.slope));
        }
        out
    }
}

/// Least-squares fit of `ln(y) = slope·ln(x) + b`; returns
/// `(slope, rms_residual)`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Bench("log-log fit needs >= 2 points".into()));
    }
    if xs.iter().chain(ys).any(|&v| v <= 0.0) {
        return Err(Error::Bench("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Bench("log-log fit needs distinct sizes".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let b = my - slope * mx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - (slope * x + b);
            r * r
        })
        .sum();
    Ok((slope, (ss / n).sqrt()))
}

static HARNESS_BUSY: AtomicBool = AtomicBool::new(false);

/// In-process exclusivity: only one harness measurement may run at a time
/// (concurrent timing would contaminate both).
pub struct HarnessGuard(());

impl HarnessGuard {
    pub fn acquire() -> Result<Self> {
        if HARNESS_BUSY.swap(true, Ordering::SeqCst) {
            return Err(Error::Bench(
                "another harness measurement is already running in this process".into(),
            ));
        }
        Ok(HarnessGuard(()))
    }
}

impl Drop for HarnessGuard {
    fn drop(&mut self) {
        HARNESS_BUSY.store(false, Ordering::SeqCst);
    }
}

const MIN_SAMPLE_NS: u128 = 100_000; // 100 µs beats timer granularity
const WARMUP_PASSES: usize = 2;
const REPETITIONS: usize = 5;

/// Times one stage across frame counts and fits the log-log slope.
///
/// Per size: the stage data is rebuilt at that T, warm-up passes are
/// discarded, then each of the 5 repetitions runs the stage enough times
/// (doubling automatically) to exceed 100 µs; the per-pass median is kept.
pub fn measure_scaling(
    stage: StageKind,
    t_values: &[usize],
    template: &CostModel,
    seed: u64,
) -> Result<ScalingReport> {
    let _guard = HarnessGuard::acquire()?;
    template.validate()?;
    if t_values.len() < 4 {
        return Err(Error::Bench(format!(
            "need >= 4 frame counts, got {}",
            t_values.len()
        )));
    }
    if t_values.windows(2).any(|w| w[0] >= w[1]) || t_values[0] == 0 {
        return Err(Error::Bench(
            "frame counts must be positive and strictly increasing".into(),
        ));
    }
    let nk = template.way * template.shot;
    let mut sizes = Vec::with_capacity(t_values.len());
    let mut median_ns = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let cm = template.with_frames(t);
        let videos = episode_sequences(&cm, derive_seed(seed, &format!("bench/{t}")));
        for _ in 0..WARMUP_PASSES {
            black_box(run_stage(stage, &videos, nk)?);
        }
        let mut iters = 1u32;
        let mut samples = Vec::with_capacity(REPETITIONS);
        let mut rep = 0;
        while rep < REPETITIONS {
            let start = Instant::now();
            for _ in 0..iters {
                black_box(run_stage(stage, &videos, nk)?);
            }
            let elapsed = start.elapsed().as_nanos();
            if elapsed < MIN_SAMPLE_NS {
                iters = iters.saturating_mul(2);
                samples.clear();
                rep = 0;
                continue;
            }
            samples.push(elapsed as f64 / iters as f64);
            rep += 1;
        }
        samples.sort_by(|a, b| a.total_cmp(b));
        sizes.push(t);
        median_ns.push(samples[samples.len() / 2]);
    }
    let xs: Vec<f64> = sizes.iter().map(|&t| t as f64).collect();
    let (slope, residual) = fit_loglog(&xs, &median_ns)?;
    if !slope.is_finite() {
        return Err(Error::Bench("fitted slope is not finite".into()));
    }
    Ok(ScalingReport {
        stage,
        sizes,
        median_ns,
        slope,
        residual,
        repetitions: REPETITIONS,
    })
}
