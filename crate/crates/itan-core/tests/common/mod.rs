//! Shared oracles for the integration suites: independent implementations
//! kept deliberately naive so they cannot share bugs with the library code.

use itan_core::metrics::cosine;
use itan_core::tensor::{FeatureMap, FrameSequence, NdArray};

/// Exhaustive DTW: enumerates every monotonic path from (0,0) to
/// (n-1, m-1) with steps (1,0), (0,1), (1,1), accumulating `1 - cos` cell
/// costs left-to-right along the path (the same association order the
/// library's DP recurrence uses, so agreeing paths agree bitwise), and
/// takes the lexicographic (cost, length) minimum. Returns
/// `1 - cost / length`. Only viable for tiny inputs.
pub fn brute_force_dtw(a: &FrameSequence<f64>, b: &FrameSequence<f64>) -> f64 {
    let (n, m) = (a.n_t(), b.n_t());
    assert!(
        n >= 1 && m >= 1 && n <= 8 && m <= 8,
        "oracle is exponential"
    );
    let mut d = vec![0.0f64; n * m];
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
            if i == self.n - 1 && j == self.m - 1 {
                let cand = (cost, len);
                let better = match self.best {
                    None => true,
                    Some((bc, bl)) => cand.0 < bc || (cand.0 == bc && cand.1 < bl),
                };
                if better {
                    self.best = Some(cand);
                }
                return;
            }
            if i + 1 < self.n && j + 1 < self.m {
                let c = self.d[(i + 1) * self.m + (j + 1)];
                self.walk(i + 1, j + 1, cost + c, len + 1);
            }
            if i + 1 < self.n {
                let c = self.d[(i + 1) * self.m + j];
                self.walk(i + 1, j, cost + c, len + 1);
            }
            if j + 1 < self.m {
                let c = self.d[i * self.m + (j + 1)];
                self.walk(i, j + 1, cost + c, len + 1);
            }
        }
    }

    let mut s = Search {
        n,
        m,
        d: &d,
        best: None,
    };
    s.walk(0, 0, d[0], 1);
    let (cost, len) = s.best.expect("at least one path exists");
    1.0 - cost / (len as f64)
}

/// Spatially pools a feature map to a frame sequence: each frame's (h, w)
/// grid is averaged cell-by-cell in row-major order. Matches how the model
/// tokenizes frames, without involving any tape machinery.
pub fn pooled_sequence(fm: &FeatureMap<f64>) -> FrameSequence<f64> {
    let shape = fm.values().shape();
    let (t, h, w, c) = (shape[0], shape[1], shape[2], shape[3]);
    let mut rows = vec![0.0f64; t * c];
    for ti in 0..t {
        for hi in 0..h {
            for wi in 0..w {
                for ci in 0..c {
                    rows[ti * c + ci] += fm.values().get(&[ti, hi, wi, ci]);
                }
            }
        }
        for ci in 0..c {
            rows[ti * c + ci] /= (h * w) as f64;
        }
    }
    FrameSequence::new(NdArray::from_vec(&[t, c], rows).unwrap()).unwrap()
}
