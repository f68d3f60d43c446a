//! Factorized attention blocks: per-frame spatial self-attention, a
//! squeeze-excite channel gate, and temporal self-attention over frame
//! tokens with optional positional encoding.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tape::{NodeId, ParamId, ParamSet, Tape};
use crate::tensor::{NdArray, Real};
use serde::{Deserialize, Serialize};

/// Glorot/Xavier-uniform initialization: U(-l, l) with
/// `l = sqrt(6 / (fan_in + fan_out))`, filled in row-major order from the
/// given stream (draws happen in f64, then cast, so f32 and f64 models see
/// the same underlying values).
pub fn glorot_uniform<R: Real>(shape: &[usize; 2], rng: &mut Rng) -> NdArray<R> {
    let limit = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
    NdArray::from_fn(&shape[..], |_| R::from_f64(rng.uniform(-limit, limit)))
}

/// Parameters of one multi-head self-attention block.
///
/// Each head owns projection triples `w_q/w_k/w_v: (n_c, d)` with
/// `d = n_c / heads`; concatenated head outputs mix through
/// `w_o: (heads * d, n_c)`.
#[derive(Debug, Clone)]
pub struct MultiHeadParams {
    pub n_c: usize,
    pub heads: usize,
    pub head_dim: usize,
    w_q: Vec<ParamId>,
    w_k: Vec<ParamId>,
    w_v: Vec<ParamId>,
    w_o: ParamId,
}

impl MultiHeadParams {
    pub fn new<R: Real>(
        set: &mut ParamSet<R>,
        prefix: &str,
        n_c: usize,
        heads: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if heads == 0 || !n_c.is_multiple_of(heads) {
            return Err(Error::InvalidShape(format!(
                "{prefix}: channel count {n_c} not divisible by heads {heads}"
            )));
        }
        let head_dim = n_c / heads;
        let mut w_q = Vec::with_capacity(heads);
        let mut w_k = Vec::with_capacity(heads);
        let mut w_v = Vec::with_capacity(heads);
        for i in 0..heads {
            w_q.push(set.add(
                format!("{prefix}.h{i}.w_q"),
                glorot_uniform(&[n_c, head_dim], rng),
                true,
            ));
            w_k.push(set.add(
                format!("{prefix}.h{i}.w_k"),
                glorot_uniform(&[n_c, head_dim], rng),
                true,
            ));
            w_v.push(set.add(
                format!("{prefix}.h{i}.w_v"),
                glorot_uniform(&[n_c, head_dim], rng),
                true,
            ));
        }
        let w_o = set.add(
            format!("{prefix}.w_o"),
            glorot_uniform(&[n_c, n_c], rng),
            true,
        );
        Ok(MultiHeadParams {
            n_c,
            heads,
            head_dim,
            w_q,
            w_k,
            w_v,
            w_o,
        })
    }

    /// Multi-head self-attention over token rows `x: (n, n_c)` (no residual;
    /// callers add their own skip connection).
    pub fn attend<R: Real>(
        &self,
        tape: &mut Tape<R>,
        set: &ParamSet<R>,
        x: NodeId,
    ) -> Result<NodeId> {
        let shape = tape.shape(x);
        if shape.len() != 2 || shape[1] != self.n_c {
            return Err(Error::DimensionMismatch {
                op: "attend",
                lhs: shape.to_vec(),
                rhs: vec![0, self.n_c],
            });
        }
        let mut head_outputs = Vec::with_capacity(self.heads);
        for i in 0..self.heads {
            let wq = tape.param(set, self.w_q[i]);
            let wk = tape.param(set, self.w_k[i]);
            let wv = tape.param(set, self.w_v[i]);
            let q = tape.matmul(x, wq)?;
            let k = tape.matmul(x, wk)?;
            let v = tape.matmul(x, wv)?;
            let (out, _alpha) = scaled_dot_attention(tape, q, k, v)?;
            head_outputs.push(out);
        }
        let concat = tape.concat_cols(&head_outputs)?;
        let wo = tape.param(set, self.w_o);
        tape.matmul(concat, wo)
    }
}

/// Scaled dot-product attention on pre-projected `q, k, v: (n, d)`.
/// Returns the mixed values and the attention weights `(n, n)`.
pub fn scaled_dot_attention<R: Real>(
    tape: &mut Tape<R>,
    q: NodeId,
    k: NodeId,
    v: NodeId,
) -> Result<(NodeId, NodeId)> {
    let d = tape.shape(q)[1];
    let kt = tape.transpose(k)?;
    let scores = tape.matmul(q, kt)?;
    let scaled = tape.scale(scores, R::from_f64(1.0 / (d as f64).sqrt()))?;
    let alpha = tape.softmax(scaled, 1)?;
    let out = tape.matmul(alpha, v)?;
    Ok((out, alpha))
}

/// Squeeze-excite channel gate: `s = sigmoid(relu(z W1) W2)` on the global
/// average descriptor `z`, applied multiplicatively over channels.
#[derive(Debug, Clone)]
pub struct ChannelParams {
    pub n_c: usize,
    /// Bottleneck width actually used: `max(n_c / reduction, 1)`.
    pub bottleneck: usize,
    w1: ParamId,
    w2: ParamId,
}

impl ChannelParams {
    pub fn new<R: Real>(
        set: &mut ParamSet<R>,
        prefix: &str,
        n_c: usize,
        reduction: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if reduction == 0 {
            return Err(Error::InvalidShape(format!(
                "{prefix}: reduction must be positive"
            )));
        }
        let bottleneck = (n_c / reduction).max(1);
        let w1 = set.add(
            format!("{prefix}.w1"),
            glorot_uniform(&[n_c, bottleneck], rng),
            true,
        );
        let w2 = set.add(
            format!("{prefix}.w2"),
            glorot_uniform(&[bottleneck, n_c], rng),
            true,
        );
        Ok(ChannelParams {
            n_c,
            bottleneck,
            w1,
            w2,
        })
    }

    /// Computes the gate from a rank-4 feature node `(t, h, w, c)` and
    /// returns `(gate, gated_features)`.
    pub fn gate<R: Real>(
        &self,
        tape: &mut Tape<R>,
        set: &ParamSet<R>,
        f: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let shape = tape.shape(f).to_vec();
        if shape.len() != 4 || shape[3] != self.n_c {
            return Err(Error::DimensionMismatch {
                op: "channel_gate",
                lhs: shape,
                rhs: vec![0, 0, 0, self.n_c],
            });
        }
        let z = tape.reduce_mean(f, &[0, 1, 2])?; // (c)
        let z2 = tape.reshape(z, &[1, self.n_c])?;
        let w1 = tape.param(set, self.w1);
        let w2 = tape.param(set, self.w2);
        let u = tape.matmul(z2, w1)?;
        let u = tape.relu(u)?;
        let s2 = tape.matmul(u, w2)?;
        let s2 = tape.sigmoid(s2)?;
        let s = tape.reshape(s2, &[self.n_c])?;
        let gated = tape.mul_channel(f, s)?;
        Ok((s, gated))
    }
}

/// Positional encoding mode for the temporal stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosMode {
    Sinusoidal,
    Learnable,
}

/// Standard sinusoidal table: `PE[t, 2i] = sin(t / 10000^(2i / n_c))`,
/// `PE[t, 2i+1] = cos(...)`. Row 0 is `[0, 1, 0, 1, ...]`.
pub fn sinusoidal_encoding<R: Real>(n_t: usize, n_c: usize) -> NdArray<R> {
    let mut out = NdArray::zeros(&[n_t, n_c]);
    for t in 0..n_t {
        for i in 0..n_c.div_ceil(2) {
            let rate = (t as f64) / 10000f64.powf(2.0 * i as f64 / n_c as f64);
            out.set(&[t, 2 * i], R::from_f64(rate.sin()));
            if 2 * i + 1 < n_c {
                out.set(&[t, 2 * i + 1], R::from_f64(rate.cos()));
            }
        }
    }
    out
}

/// Positional encoding applied to temporal tokens: either the fixed
/// sinusoidal table or a trainable per-index embedding table.
#[derive(Debug, Clone)]
pub struct PositionalEncoder<R> {
    pub mode: PosMode,
    pub n_t: usize,
    pub n_c: usize,
    fixed: Option<NdArray<R>>,
    learned: Option<ParamId>,
}

impl<R: Real> PositionalEncoder<R> {
    pub fn new(
        set: &mut ParamSet<R>,
        prefix: &str,
        mode: PosMode,
        n_t: usize,
        n_c: usize,
        rng: &mut Rng,
    ) -> Self {
        match mode {
            PosMode::Sinusoidal => PositionalEncoder {
                mode,
                n_t,
                n_c,
                fixed: Some(sinusoidal_encoding(n_t, n_c)),
                learned: None,
            },
            PosMode::Learnable => {
                // Scale 0.3: small enough not to drown content at init, large
                // enough that order-dependent gradients are nonzero from the
                // first episode (a near-zero table sits on a saddle where the
                // escape time is seed-dependent).
                let table = NdArray::from_fn(&[n_t, n_c], |_| R::from_f64(0.3 * rng.gaussian()));
                let id = set.add(format!("{prefix}.table"), table, true);
                PositionalEncoder {
                    mode,
                    n_t,
                    n_c,
                    fixed: None,
                    learned: Some(id),
                }
            }
        }
    }

    /// Adds the encoding table to `z: (n_t, n_c)`.
    pub fn apply(&self, tape: &mut Tape<R>, set: &ParamSet<R>, z: NodeId) -> Result<NodeId> {
        let shape = tape.shape(z);
        if shape != [self.n_t, self.n_c] {
            return Err(Error::DimensionMismatch {
                op: "positional",
                lhs: shape.to_vec(),
                rhs: vec![self.n_t, self.n_c],
            });
        }
        let table = match (self.fixed.as_ref(), self.learned) {
            (Some(t), _) => tape.input(t.clone()),
            (None, Some(id)) => tape.param(set, id),
            _ => unreachable!("encoder has either a fixed or a learned table"),
        };
        tape.add(z, table)
    }
}

/// Per-frame spatial self-attention with residual: every frame's `(h*w, c)`
/// cell grid attends within itself, sharing one block's weights across
/// frames. Shape `(t, h, w, c)` is preserved.
pub fn spatial_encode<R: Real>(
    tape: &mut Tape<R>,
    set: &ParamSet<R>,
    mha: &MultiHeadParams,
    f: NodeId,
) -> Result<NodeId> {
    let shape = tape.shape(f).to_vec();
    if shape.len() != 4 {
        return Err(Error::InvalidShape(format!(
            "spatial_encode expects rank 4, got {shape:?}"
        )));
    }
    let (t, h, w, c) = (shape[0], shape[1], shape[2], shape[3]);
    let mut frames = Vec::with_capacity(t);
    for i in 0..t {
        let frame = tape.slice_index(f, i)?; // (h, w, c)
        let cells = tape.reshape(frame, &[h * w, c])?;
        let att = mha.attend(tape, set, cells)?;
        let res = tape.add(cells, att)?;
        frames.push(res);
    }
    let stacked = tape.stack(&frames)?; // (t, h*w, c)
    tape.reshape(stacked, &[t, h, w, c])
}

/// Channel gate stage (no residual; the gate rescales features in place).
pub fn channel_encode<R: Real>(
    tape: &mut Tape<R>,
    set: &ParamSet<R>,
    ch: &ChannelParams,
    f: NodeId,
) -> Result<NodeId> {
    Ok(ch.gate(tape, set, f)?.1)
}

/// Collapses each frame to a token by spatial mean: `(t, h, w, c) -> (t, c)`.
pub fn temporal_tokenize<R: Real>(tape: &mut Tape<R>, f: NodeId) -> Result<NodeId> {
    let shape = tape.shape(f);
    if shape.len() != 4 {
        return Err(Error::InvalidShape(format!(
            "temporal_tokenize expects rank 4, got {shape:?}"
        )));
    }
    tape.reduce_mean(f, &[1, 2])
}

/// Temporal self-attention with residual over frame tokens `(t, c)`.
pub fn temporal_encode<R: Real>(
    tape: &mut Tape<R>,
    set: &ParamSet<R>,
    mha: &MultiHeadParams,
    z: NodeId,
) -> Result<NodeId> {
    let att = mha.attend(tape, set, z)?;
    tape.add(z, att)
}
