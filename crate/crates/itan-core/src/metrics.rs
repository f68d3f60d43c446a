//! Sequence similarity metrics (frame-wise, mean-pooled, explicit DTW) and
//! episode scoring. These run outside the tape; training-time scores use the
//! tape's `cosine_rows` primitive instead.

use crate::error::{Error, Result};
use crate::tensor::{FrameSequence, Real};
use serde::{Deserialize, Serialize};

/// Floor applied to cosine denominators, defining cos against a zero vector
/// as 0 rather than NaN.
pub const COSINE_EPS: f64 = 1e-8;

/// Receiver for multiply-accumulate counts (the "census"). The unit sink
/// compiles to nothing, so production calls carry no bookkeeping cost.
pub trait MacSink {
    fn record(&mut self, macs: u64);
}

impl MacSink for () {
    #[inline(always)]
    fn record(&mut self, _macs: u64) {}
}

/// Accumulating MAC counter used by the benchmark harness.
#[derive(Debug, Default, Clone, Copy)]
pub struct MacCensus {
    pub macs: u64,
}

impl MacSink for MacCensus {
    #[inline(always)]
    fn record(&mut self, macs: u64) {
        self.macs += macs;
    }
}

/// Which sequence metric scores an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "framewise")]
    FrameWise,
    #[serde(rename = "mean_pooled")]
    MeanPooled,
    #[serde(rename = "dtw")]
    Dtw,
}

/// Cosine similarity of two equal-length vectors with the eps-floored
/// denominator.
///
/// Bitwise-identical nonzero inputs short-circuit to exactly 1.0 (the
/// computed form can land one ulp off because `sqrt(x)^2 != x`). The census
/// records the 3c MACs of the definition (dot product plus both norms)
/// regardless of the shortcut.
pub fn cosine<R: Real, S: MacSink>(a: &[R], b: &[R], sink: &mut S) -> R {
    debug_assert_eq!(a.len(), b.len());
    sink.record(3 * a.len() as u64);
    if a == b && a.iter().any(|&x| x != R::ZERO) {
        return R::ONE;
    }
    let mut dot = R::ZERO;
    let mut na2 = R::ZERO;
    let mut nb2 = R::ZERO;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na2 += x * x;
        nb2 += y * y;
    }
    let denom = (na2.sqrt() * nb2.sqrt()).maximum(R::from_f64(COSINE_EPS));
    dot / denom
}

fn check_channels<R: Real>(a: &FrameSequence<R>, b: &FrameSequence<R>) -> Result<()> {
    if a.n_c() != b.n_c() {
        return Err(Error::DimensionMismatch {
            op: "sequence_metric",
            lhs: vec![a.n_t(), a.n_c()],
            rhs: vec![b.n_t(), b.n_c()],
        });
    }
    Ok(())
}

fn check_equal_length<R: Real>(a: &FrameSequence<R>, b: &FrameSequence<R>) -> Result<()> {
    check_channels(a, b)?;
    if a.n_t() != b.n_t() {
        return Err(Error::DimensionMismatch {
            op: "sequence_metric",
            lhs: vec![a.n_t(), a.n_c()],
            rhs: vec![b.n_t(), b.n_c()],
        });
    }
    Ok(())
}

/// Frame-wise similarity: mean over t of cos(a_t, b_t). Order sensitive.
pub fn frame_similarity<R: Real>(a: &FrameSequence<R>, b: &FrameSequence<R>) -> Result<R> {
    frame_similarity_counted(a, b, &mut ())
}

pub fn frame_similarity_counted<R: Real, S: MacSink>(
    a: &FrameSequence<R>,
    b: &FrameSequence<R>,
    sink: &mut S,
) -> Result<R> {
    check_equal_length(a, b)?;
    let n = a.n_t();
    let mut total = R::ZERO;
    for t in 0..n {
        total += cosine(a.frame(t), b.frame(t), sink);
    }
    Ok(total / R::from_f64(n as f64))
}

/// Sums frames `lo..hi` with a balanced halving tree.
///
/// Pairwise summation both improves accuracy and, for power-of-two lengths,
/// makes the result invariant under frame reversal bit for bit (the tree is
/// mirror symmetric, and IEEE addition commutes at every node). That is what
/// lets mean-pooling score order-reversed twins at exactly 1.0.
fn pairwise_frame_sum<R: Real>(seq: &FrameSequence<R>, lo: usize, hi: usize) -> Vec<R> {
    if hi - lo == 1 {
        return seq.frame(lo).to_vec();
    }
    let mid = lo + (hi - lo) / 2;
    let mut left = pairwise_frame_sum(seq, lo, mid);
    let right = pairwise_frame_sum(seq, mid, hi);
    for (l, r) in left.iter_mut().zip(right) {
        *l += r;
    }
    left
}

/// Per-channel temporal mean of a sequence (pairwise summation).
pub fn temporal_mean<R: Real>(seq: &FrameSequence<R>) -> Vec<R> {
    let mut sum = pairwise_frame_sum(seq, 0, seq.n_t());
    let inv = R::ONE / R::from_f64(seq.n_t() as f64);
    for v in &mut sum {
        *v *= inv;
    }
    sum
}

/// Mean-pooled similarity: cos of the temporal means. Order blind.
pub fn mean_pooled_similarity<R: Real>(a: &FrameSequence<R>, b: &FrameSequence<R>) -> Result<R> {
    mean_pooled_similarity_counted(a, b, &mut ())
}

pub fn mean_pooled_similarity_counted<R: Real, S: MacSink>(
    a: &FrameSequence<R>,
    b: &FrameSequence<R>,
    sink: &mut S,
) -> Result<R> {
    check_equal_length(a, b)?;
    let ma = temporal_mean(a);
    let mb = temporal_mean(b);
    Ok(cosine(&ma, &mb, sink))
}

/// Explicit dynamic time warping similarity.
///
/// Cell cost is `1 - cos(a_t, b_u)`; allowed steps are (1,0), (0,1), (1,1);
/// the path runs from cell (0,0) to (n-1, m-1). The program minimizes
/// (total cost, path length) lexicographically — length only breaks exact
/// cost ties, keeping the result deterministic — and returns
/// `1 - cost / length`.
pub fn dtw_similarity<R: Real>(a: &FrameSequence<R>, b: &FrameSequence<R>) -> Result<R> {
    dtw_similarity_counted(a, b, &mut ())
}

pub fn dtw_similarity_counted<R: Real, S: MacSink>(
    a: &FrameSequence<R>,
    b: &FrameSequence<R>,
    sink: &mut S,
) -> Result<R> {
    check_channels(a, b)?;
    let (n, m) = (a.n_t(), b.n_t());
    let mut d = vec![R::ZERO; n * m];
    for i in 0..n {
        for j in 0..m {
            d[i * m + j] = R::ONE - cosine(a.frame(i), b.frame(j), sink);
        }
    }

    #[derive(Clone, Copy)]
    struct Cell<R> {
        cost: R,
        len: u32,
    }
    let better =
        |c: &Cell<R>, cur: &Cell<R>| c.cost < cur.cost || (c.cost == cur.cost && c.len < cur.len);

    let mut dp: Vec<Cell<R>> = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            let mut pred: Option<Cell<R>> = None;
            let consider = |c: Cell<R>, pred: &mut Option<Cell<R>>| match pred {
                None => *pred = Some(c),
                Some(cur) => {
                    if better(&c, cur) {
                        *pred = Some(c);
                    }
                }
            };
            if i > 0 && j > 0 {
                consider(dp[(i - 1) * m + (j - 1)], &mut pred);
            }
            if i > 0 {
                consider(dp[(i - 1) * m + j], &mut pred);
            }
            if j > 0 {
                consider(dp[i * m + (j - 1)], &mut pred);
            }
            let cell = match pred {
                None => Cell {
                    cost: d[i * m + j],
                    len: 1,
                },
                Some(p) => Cell {
                    cost: p.cost + d[i * m + j],
                    len: p.len + 1,
                },
            };
            dp.push(cell);
        }
    }
    let last = dp[n * m - 1];
    Ok(R::ONE - last.cost / R::from_f64(last.len as f64))
}

/// Applies a metric by kind.
pub fn sequence_similarity<R: Real, S: MacSink>(
    metric: MetricKind,
    a: &FrameSequence<R>,
    b: &FrameSequence<R>,
    sink: &mut S,
) -> Result<R> {
    match metric {
        MetricKind::FrameWise => frame_similarity_counted(a, b, sink),
        MetricKind::MeanPooled => mean_pooled_similarity_counted(a, b, sink),
        MetricKind::Dtw => dtw_similarity_counted(a, b, sink),
    }
}

/// Per-class scores for a query: the sum of query-to-shot similarities
/// within each class. `support` pairs each embedded shot with its episode
/// label in `0..way`, and must hold exactly K shots per class.
pub fn class_scores<R: Real, S: MacSink>(
    query: &FrameSequence<R>,
    support: &[(&FrameSequence<R>, usize)],
    way: usize,
    metric: MetricKind,
    sink: &mut S,
) -> Result<Vec<R>> {
    if way == 0 || support.is_empty() || !support.len().is_multiple_of(way) {
        return Err(Error::Sampling(format!(
            "support size {} is not a multiple of way {}",
            support.len(),
            way
        )));
    }
    let shot = support.len() / way;
    let mut counts = vec![0usize; way];
    let mut scores = vec![R::ZERO; way];
    for &(seq, label) in support {
        if label >= way {
            return Err(Error::LabelOutOfRange {
                label,
                classes: way,
            });
        }
        counts[label] += 1;
        scores[label] += sequence_similarity(metric, query, seq, sink)?;
    }
    if counts.iter().any(|&c| c != shot) {
        return Err(Error::Sampling(format!(
            "support composition {counts:?} is not {shot} per class"
        )));
    }
    Ok(scores)
}

/// Index of the maximum score; exact ties resolve to the lowest index.
pub fn argmax_tie_low<R: Real>(scores: &[R]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::tensor::NdArray;

    fn random_seq(rng: &mut Rng, n_t: usize, n_c: usize) -> FrameSequence<f64> {
        FrameSequence::new(NdArray::from_fn(&[n_t, n_c], |_| rng.gaussian())).unwrap()
    }

    fn reversed(seq: &FrameSequence<f64>) -> FrameSequence<f64> {
        let (n, c) = (seq.n_t(), seq.n_c());
        FrameSequence::new(NdArray::from_fn(&[n, c], |i| {
            seq.frame(n - 1 - i / c)[i % c]
        }))
        .unwrap()
    }

    #[test]
    fn self_similarity_is_exactly_one() {
        let mut rng = Rng::new(1);
        let a = random_seq(&mut rng, 8, 16);
        assert_eq!(frame_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(mean_pooled_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(dtw_similarity(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn zero_vector_cosine_is_zero() {
        let z = [0.0f64; 4];
        let v = [1.0f64, 2.0, 3.0, 4.0];
        assert_eq!(cosine(&z, &v, &mut ()), 0.0);
        assert_eq!(cosine(&z, &z, &mut ()), 0.0);
    }

    #[test]
    fn cosine_is_scale_invariant_and_bounded() {
        let mut rng = Rng::new(2);
        for _ in 0..50 {
            let a: Vec<f64> = (0..8).map(|_| rng.gaussian()).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.gaussian()).collect();
            let c = cosine(&a, &b, &mut ());
            assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
            let a2: Vec<f64> = a.iter().map(|x| x * 7.5).collect();
            assert!((cosine(&a2, &b, &mut ()) - c).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_pooled_is_order_blind_bitwise_for_pow2_length() {
        let mut rng = Rng::new(3);
        for _ in 0..20 {
            let a = random_seq(&mut rng, 8, 12);
            let b = reversed(&a);
            assert_eq!(mean_pooled_similarity(&a, &b).unwrap(), 1.0);
        }
    }

    #[test]
    fn frame_similarity_is_order_sensitive() {
        let mut rng = Rng::new(4);
        let a = random_seq(&mut rng, 8, 16);
        let b = reversed(&a);
        let s = frame_similarity(&a, &b).unwrap();
        assert!(s < 0.9, "reversal should not look identical, got {s}");
    }

    #[test]
    fn dtw_recovers_a_temporal_shift() {
        let mut rng = Rng::new(5);
        let a = random_seq(&mut rng, 8, 16);
        // b = a delayed by one frame (first frame duplicated).
        let mut rows: Vec<f64> = Vec::new();
        rows.extend_from_slice(a.frame(0));
        for t in 0..7 {
            rows.extend_from_slice(a.frame(t));
        }
        let b = FrameSequence::new(NdArray::from_vec(&[8, 16], rows).unwrap()).unwrap();
        let dtw = dtw_similarity(&a, &b).unwrap();
        let fw = frame_similarity(&a, &b).unwrap();
        assert!(
            dtw > fw,
            "alignment should beat rigid comparison: dtw {dtw} vs framewise {fw}"
        );
        // Exact oracle: every frame of b matches a frame of a bitwise except
        // that a(7) is absent from b, so the optimal path pays 1 - cos(a7, a6)
        // at the mandatory corner cell (7,7) and is otherwise free. The
        // shortest such path has 9 cells: (0,0),(0,1),(1,2),...,(6,7),(7,7).
        let corner = 1.0 - cosine(a.frame(7), a.frame(6), &mut ());
        let expected = 1.0 - corner / 9.0;
        assert!(
            (dtw - expected).abs() < 1e-12,
            "dtw {dtw} vs closed form {expected}"
        );
    }

    #[test]
    fn dtw_is_symmetric_within_tolerance() {
        let mut rng = Rng::new(6);
        for _ in 0..25 {
            let a = random_seq(&mut rng, 7, 10);
            let b = random_seq(&mut rng, 5, 10);
            let ab = dtw_similarity(&a, &b).unwrap();
            let ba = dtw_similarity(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-9, "asymmetry {}", (ab - ba).abs());
        }
    }

    #[test]
    fn dtw_single_frame_reduces_to_cosine() {
        let mut rng = Rng::new(7);
        let a = random_seq(&mut rng, 1, 16);
        let b = random_seq(&mut rng, 1, 16);
        let dtw = dtw_similarity(&a, &b).unwrap();
        let c = cosine(a.frame(0), b.frame(0), &mut ());
        assert!((dtw - c).abs() < 1e-15);
    }

    // Exhaustive path enumeration used as an in-module oracle (the
    // integration suite carries an independent copy).
    fn dtw_oracle(a: &FrameSequence<f64>, b: &FrameSequence<f64>) -> f64 {
        let (n, m) = (a.n_t(), b.n_t());
        let mut d = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                d[i * m + j] = 1.0 - cosine(a.frame(i), b.frame(j), &mut ());
            }
        }
        struct Search<'a> {
            n: usize,
            m: usize,
            d: &'a [f64],
            best: Option<(f64, u32)>,
        }
        impl Search<'_> {
            fn walk(&mut self, i: usize, j: usize, cost: f64, len: u32) {
                let cost = cost + self.d[i * self.m + j];
                let len = len + 1;
                if i == self.n - 1 && j == self.m - 1 {
                    let cand = (cost, len);
                    match &self.best {
                        None => self.best = Some(cand),
                        Some(cur) => {
                            if cand.0 < cur.0 || (cand.0 == cur.0 && cand.1 < cur.1) {
                                self.best = Some(cand);
                            }
                        }
                    }
                    return;
                }
                if i + 1 < self.n && j + 1 < self.m {
                    self.walk(i + 1, j + 1, cost, len);
                }
                if i + 1 < self.n {
                    self.walk(i + 1, j, cost, len);
                }
                if j + 1 < self.m {
                    self.walk(i, j + 1, cost, len);
                }
            }
        }
        let mut search = Search {
            n,
            m,
            d: &d,
            best: None,
        };
        search.walk(0, 0, 0.0, 0);
        let (cost, len) = search.best.unwrap();
        1.0 - cost / len as f64
    }

    #[test]
    fn dtw_matches_enumeration_oracle_exactly() {
        let mut rng = Rng::new(8);
        for _ in 0..100 {
            let n = 1 + rng.bounded(5) as usize;
            let m = 1 + rng.bounded(5) as usize;
            let a = random_seq(&mut rng, n, 6);
            let b = random_seq(&mut rng, m, 6);
            let got = dtw_similarity(&a, &b).unwrap();
            let want = dtw_oracle(&a, &b);
            assert_eq!(got, want, "dtw {got} != oracle {want} at n={n} m={m}");
        }
    }

    #[test]
    fn class_scores_validates_composition() {
        let mut rng = Rng::new(9);
        let q = random_seq(&mut rng, 4, 8);
        let s0 = random_seq(&mut rng, 4, 8);
        let s1 = random_seq(&mut rng, 4, 8);
        // 2 entries for class 0, none for class 1.
        let support = [(&s0, 0usize), (&s1, 0usize)];
        let err = class_scores(&q, &support, 2, MetricKind::FrameWise, &mut ()).unwrap_err();
        assert!(matches!(err, Error::Sampling(_)));
        // Balanced composition works and sums per class.
        let support = [(&s0, 0usize), (&s1, 1usize)];
        let scores = class_scores(&q, &support, 2, MetricKind::FrameWise, &mut ()).unwrap();
        assert_eq!(scores.len(), 2);
        assert!((scores[0] - frame_similarity(&q, &s0).unwrap()).abs() < 1e-15);
        assert!((scores[1] - frame_similarity(&q, &s1).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_tie_low(&[0.5f64, 0.5, 0.3]), 0);
        assert_eq!(argmax_tie_low(&[0.1f64, 0.5, 0.5]), 1);
        assert_eq!(argmax_tie_low(&[0.1f64]), 0);
    }

    #[test]
    fn census_counts_cosine_macs() {
        let mut census = MacCensus::default();
        let a = [1.0f64, 2.0, 3.0];
        let b = [4.0f64, 5.0, 6.0];
        cosine(&a, &b, &mut census);
        assert_eq!(census.macs, 9); // 3 * c
        let mut rng = Rng::new(10);
        let x = random_seq(&mut rng, 4, 5);
        let y = random_seq(&mut rng, 4, 5);
        let mut census = MacCensus::default();
        frame_similarity_counted(&x, &y, &mut census).unwrap();
        assert_eq!(census.macs, 4 * 3 * 5); // n_t * 3c
        let mut census = MacCensus::default();
        dtw_similarity_counted(&x, &y, &mut census).unwrap();
        assert_eq!(census.macs, 16 * 3 * 5); // n_t^2 cells * 3c
    }
}
