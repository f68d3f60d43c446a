//! Reverse-mode differentiation over a linear tape of eager tensor ops.
//!
//! Every op validates shapes, computes its value immediately, and records
//! enough structure for the vector-Jacobian product. `backward` seeds the
//! scalar loss with 1, walks the tape once in reverse, and accumulates (+=)
//! parameter gradients into the [`ParamSet`].

use crate::error::{Error, Result};
use crate::metrics::COSINE_EPS;
use crate::tensor::{strides_of, NdArray, Real};
use std::collections::HashMap;

/// Handle to a parameter stored in a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// A named trainable (or frozen) tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Parameter<R> {
    pub name: String,
    pub value: NdArray<R>,
    pub grad: NdArray<R>,
    pub trainable: bool,
}

/// Owning container for model parameters, addressed by [`ParamId`].
#[derive(Debug, Clone, Default)]
pub struct ParamSet<R> {
    params: Vec<Parameter<R>>,
}

impl<R: Real> ParamSet<R> {
    pub fn new() -> Self {
        ParamSet { params: Vec::new() }
    }

    /// Registers a parameter. Names must be unique (they key checkpoints).
    pub fn add(&mut self, name: impl Into<String>, value: NdArray<R>, trainable: bool) -> ParamId {
        let name = name.into();
        assert!(
            self.find(&name).is_none(),
            "duplicate parameter name {name:?}"
        );
        let grad = NdArray::zeros(value.shape());
        self.params.push(Parameter {
            name,
            value,
            grad,
            trainable,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Parameter<R> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<R> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &NdArray<R> {
        &self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &NdArray<R> {
        &self.params[id.0].grad
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Zeroes every gradient accumulator (called at the start of each
    /// optimizer step).
    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(R::ZERO);
        }
    }

    pub fn accumulate_grad(&mut self, id: ParamId, delta: &NdArray<R>) -> Result<()> {
        self.params[id.0].grad.add_assign(delta)
    }

    /// Total scalar count across all parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op<R> {
    Constant,
    Param(ParamId),
    MatMul { a: NodeId, b: NodeId },
    Transpose { x: NodeId },
    Softmax { x: NodeId, axis: usize },
    Relu { x: NodeId },
    Sigmoid { x: NodeId },
    Add { a: NodeId, b: NodeId },
    AddRow { x: NodeId, bias: NodeId },
    Mul { a: NodeId, b: NodeId },
    MulChannel { x: NodeId, gate: NodeId },
    Scale { x: NodeId, factor: R },
    ReduceMean { x: NodeId, axes: Vec<usize> },
    Reshape { x: NodeId },
    SliceIndex { x: NodeId, index: usize },
    Stack { parts: Vec<NodeId> },
    ConcatRows { parts: Vec<NodeId> },
    ConcatCols { parts: Vec<NodeId> },
    CosineRows { a: NodeId, b: NodeId },
    CrossEntropy { logits: NodeId, labels: Vec<usize> },
}

#[derive(Debug)]
struct Node<R> {
    value: NdArray<R>,
    grad: Option<NdArray<R>>,
    op: Op<R>,
}

/// Linear tape of eagerly evaluated ops.
#[derive(Debug, Default)]
pub struct Tape<R> {
    nodes: Vec<Node<R>>,
    param_nodes: HashMap<ParamId, NodeId>,
}

impl<R: Real> Tape<R> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: NdArray<R>, op: Op<R>) -> NodeId {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Records an input tensor (a leaf; it can receive a gradient but is not
    /// a parameter).
    pub fn input(&mut self, value: NdArray<R>) -> NodeId {
        self.push(value, Op::Constant)
    }

    /// Records (or reuses) the tape node for a parameter. A parameter used by
    /// many ops shares one node, so its gradient contributions accumulate.
    pub fn param(&mut self, set: &ParamSet<R>, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id) {
            return n;
        }
        let n = self.push(set.value(id).clone(), Op::Param(id));
        self.param_nodes.insert(id, n);
        n
    }

    pub fn value(&self, id: NodeId) -> &NdArray<R> {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` loss w.r.t. this node, if reached.
    pub fn grad(&self, id: NodeId) -> Option<&NdArray<R>> {
        self.nodes[id.0].grad.as_ref()
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    // ---- primitive ops -------------------------------------------------

    /// Matrix product of two rank-2 nodes: `(m, k) x (k, n) -> (m, n)`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rank() != 2 || bv.rank() != 2 || av.shape()[1] != bv.shape()[0] {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                lhs: av.shape().to_vec(),
                rhs: bv.shape().to_vec(),
            });
        }
        let value = matmul_kernel(av, bv);
        Ok(self.push(value, Op::MatMul { a, b }))
    }

    /// Transpose of a rank-2 node.
    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rank() != 2 {
            return Err(Error::InvalidShape(format!(
                "transpose expects rank 2, got {:?}",
                xv.shape()
            )));
        }
        let value = transpose_kernel(xv);
        Ok(self.push(value, Op::Transpose { x }))
    }

    /// Softmax along `axis`, computed with the max-shift for stability.
    pub fn softmax(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if axis >= xv.rank() {
            return Err(Error::AxisOutOfRange {
                axis,
                rank: xv.rank(),
            });
        }
        let value = softmax_kernel(xv, axis);
        Ok(self.push(value, Op::Softmax { x, axis }))
    }

    /// Elementwise max(x, 0). The subgradient at exactly 0 is taken as 0.
    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let value = self.value(x).map(|v| v.maximum(R::ZERO));
        Ok(self.push(value, Op::Relu { x }))
    }

    /// Elementwise logistic sigmoid, with the sign-split stable form.
    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        let value = self.value(x).map(sigmoid_scalar);
        Ok(self.push(value, Op::Sigmoid { x }))
    }

    /// Elementwise sum of two same-shape nodes.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        Ok(self.push(value, Op::Add { a, b }))
    }

    /// Adds a rank-1 bias `(e)` to every row of a rank-2 node `(n, e)`.
    pub fn add_row(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if xv.rank() != 2 || bv.rank() != 1 || xv.shape()[1] != bv.shape()[0] {
            return Err(Error::DimensionMismatch {
                op: "add_row",
                lhs: xv.shape().to_vec(),
                rhs: bv.shape().to_vec(),
            });
        }
        let mut value = xv.clone();
        for r in 0..value.shape()[0] {
            for (cell, &b) in value.row_mut(r).iter_mut().zip(bv.data()) {
                *cell += b;
            }
        }
        Ok(self.push(value, Op::AddRow { x, bias }))
    }

    /// Elementwise product of two same-shape nodes.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        Ok(self.push(value, Op::Mul { a, b }))
    }

    /// Multiplies the trailing (channel) axis of `x` by a rank-1 gate.
    pub fn mul_channel(&mut self, x: NodeId, gate: NodeId) -> Result<NodeId> {
        let (xv, gv) = (self.value(x), self.value(gate));
        let c = *xv.shape().last().unwrap_or(&0);
        if gv.rank() != 1 || gv.shape()[0] != c {
            return Err(Error::DimensionMismatch {
                op: "mul_channel",
                lhs: xv.shape().to_vec(),
                rhs: gv.shape().to_vec(),
            });
        }
        let mut value = xv.clone();
        for (i, v) in value.data_mut().iter_mut().enumerate() {
            *v *= gv.data()[i % c];
        }
        Ok(self.push(value, Op::MulChannel { x, gate }))
    }

    /// Multiplies every element by a compile-time-known constant.
    pub fn scale(&mut self, x: NodeId, factor: R) -> Result<NodeId> {
        let value = self.value(x).map(|v| v * factor);
        Ok(self.push(value, Op::Scale { x, factor }))
    }

    /// Mean over the given axes; reducing every axis yields shape `[1]`.
    pub fn reduce_mean(&mut self, x: NodeId, axes: &[usize]) -> Result<NodeId> {
        let xv = self.value(x);
        let rank = xv.rank();
        if axes.is_empty() {
            return Err(Error::InvalidShape("reduce_mean: empty axis set".into()));
        }
        let mut seen = vec![false; rank];
        for &a in axes {
            if a >= rank {
                return Err(Error::AxisOutOfRange { axis: a, rank });
            }
            if seen[a] {
                return Err(Error::InvalidShape(format!(
                    "reduce_mean: duplicate axis {a}"
                )));
            }
            seen[a] = true;
        }
        let value = reduce_mean_kernel(xv, axes);
        Ok(self.push(
            value,
            Op::ReduceMean {
                x,
                axes: axes.to_vec(),
            },
        ))
    }

    /// Reinterprets the data in a new shape with the same element count.
    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let value = self.value(x).reshape(shape)?;
        Ok(self.push(value, Op::Reshape { x }))
    }

    /// Extracts slice `index` along axis 0 of a rank >= 2 node.
    pub fn slice_index(&mut self, x: NodeId, index: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rank() < 2 {
            return Err(Error::InvalidShape(format!(
                "slice_index expects rank >= 2, got {:?}",
                xv.shape()
            )));
        }
        if index >= xv.shape()[0] {
            return Err(Error::AxisOutOfRange {
                axis: index,
                rank: xv.shape()[0],
            });
        }
        let inner: usize = xv.shape()[1..].iter().product();
        let data = xv.data()[index * inner..(index + 1) * inner].to_vec();
        let value = NdArray::from_vec(&xv.shape()[1..], data)?;
        Ok(self.push(value, Op::SliceIndex { x, index }))
    }

    /// Stacks same-shape nodes along a new leading axis.
    pub fn stack(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::InvalidShape("stack: no parts".into()));
        }
        let base = self.value(parts[0]).shape().to_vec();
        let mut data = Vec::with_capacity(parts.len() * self.value(parts[0]).len());
        for &p in parts {
            let pv = self.value(p);
            if pv.shape() != base.as_slice() {
                return Err(Error::DimensionMismatch {
                    op: "stack",
                    lhs: base,
                    rhs: pv.shape().to_vec(),
                });
            }
            data.extend_from_slice(pv.data());
        }
        let mut shape = vec![parts.len()];
        shape.extend_from_slice(&base);
        let value = NdArray::from_vec(&shape, data)?;
        Ok(self.push(
            value,
            Op::Stack {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Concatenates rank-2 nodes along rows (axis 0).
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::InvalidShape("concat_rows: no parts".into()));
        }
        let cols = self.value(parts[0]).shape().get(1).copied().unwrap_or(0);
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let pv = self.value(p);
            if pv.rank() != 2 || pv.shape()[1] != cols {
                return Err(Error::DimensionMismatch {
                    op: "concat_rows",
                    lhs: vec![rows, cols],
                    rhs: pv.shape().to_vec(),
                });
            }
            rows += pv.shape()[0];
            data.extend_from_slice(pv.data());
        }
        let value = NdArray::from_vec(&[rows, cols], data)?;
        Ok(self.push(
            value,
            Op::ConcatRows {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Concatenates rank-2 nodes along columns (axis 1).
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::InvalidShape("concat_cols: no parts".into()));
        }
        let rows = self.value(parts[0]).shape()[0];
        let mut cols = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.rank() != 2 || pv.shape()[0] != rows {
                return Err(Error::DimensionMismatch {
                    op: "concat_cols",
                    lhs: vec![rows, cols],
                    rhs: pv.shape().to_vec(),
                });
            }
            cols += pv.shape()[1];
        }
        let mut value = NdArray::zeros(&[rows, cols]);
        let mut col_off = 0;
        for &p in parts {
            let pv = self.value(p).clone();
            let pc = pv.shape()[1];
            for r in 0..rows {
                value.row_mut(r)[col_off..col_off + pc].copy_from_slice(pv.row(r));
            }
            col_off += pc;
        }
        Ok(self.push(
            value,
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Row-wise cosine similarity of two `(n, c)` nodes, yielding `(n)`.
    ///
    /// The denominator is floored at [`COSINE_EPS`] so a zero vector has
    /// similarity 0 instead of NaN.
    pub fn cosine_rows(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rank() != 2 || av.shape() != bv.shape() {
            return Err(Error::DimensionMismatch {
                op: "cosine_rows",
                lhs: av.shape().to_vec(),
                rhs: bv.shape().to_vec(),
            });
        }
        let n = av.shape()[0];
        let eps = R::from_f64(COSINE_EPS);
        let mut out = NdArray::zeros(&[n]);
        for r in 0..n {
            let (dot, na2, nb2) = row_products(av.row(r), bv.row(r));
            let denom = (na2.sqrt() * nb2.sqrt()).maximum(eps);
            out.data_mut()[r] = dot / denom;
        }
        Ok(self.push(out, Op::CosineRows { a, b }))
    }

    /// Mean cross-entropy of `(n, classes)` logits against integer labels,
    /// computed via the log-sum-exp with max-shift.
    pub fn cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let lv = self.value(logits);
        if lv.rank() != 2 || lv.shape()[0] != labels.len() || labels.is_empty() {
            return Err(Error::DimensionMismatch {
                op: "cross_entropy",
                lhs: lv.shape().to_vec(),
                rhs: vec![labels.len()],
            });
        }
        let classes = lv.shape()[1];
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                classes,
            });
        }
        let n = labels.len();
        let mut total = R::ZERO;
        for (r, &label) in labels.iter().enumerate() {
            let row = lv.row(r);
            let m = row.iter().fold(row[0], |acc, &v| acc.maximum(v));
            let mut sum = R::ZERO;
            for &v in row {
                sum += (v - m).exp();
            }
            total += m + sum.ln() - row[label];
        }
        let value = NdArray::scalar(total / R::from_f64(n as f64));
        Ok(self.push(
            value,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Affine map `x W + b` with `x: (n, in)`, `w: (in, out)`, `b: (out)`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    // ---- reverse pass ---------------------------------------------------

    /// Runs the reverse pass from a scalar loss, accumulating parameter
    /// gradients (+=) into `params`.
    pub fn backward(&mut self, loss: NodeId, params: &mut ParamSet<R>) -> Result<()> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::NonScalarLoss {
                shape: self.nodes[loss.0].value.shape().to_vec(),
            });
        }
        self.nodes[loss.0].grad = Some(NdArray::full(self.nodes[loss.0].value.shape(), R::ONE));

        let mut pending: Vec<(NodeId, NdArray<R>)> = Vec::new();
        for i in (0..=loss.0).rev() {
            let grad = match &self.nodes[i].grad {
                Some(g) => g.clone(),
                None => continue,
            };
            let op = self.nodes[i].op.clone();
            pending.clear();
            match op {
                Op::Constant => {}
                Op::Param(pid) => {
                    if params.get(pid).trainable {
                        params.accumulate_grad(pid, &grad)?;
                    }
                }
                Op::MatMul { a, b } => {
                    let bt = transpose_kernel(self.value(b));
                    let at = transpose_kernel(self.value(a));
                    pending.push((a, matmul_kernel(&grad, &bt)));
                    pending.push((b, matmul_kernel(&at, &grad)));
                }
                Op::Transpose { x } => {
                    pending.push((x, transpose_kernel(&grad)));
                }
                Op::Softmax { x, axis } => {
                    let y = &self.nodes[i].value;
                    pending.push((x, softmax_vjp(y, &grad, axis)));
                }
                Op::Relu { x } => {
                    let xv = self.value(x);
                    let delta = NdArray::from_fn(xv.shape(), |j| {
                        if xv.data()[j] > R::ZERO {
                            grad.data()[j]
                        } else {
                            R::ZERO
                        }
                    });
                    pending.push((x, delta));
                }
                Op::Sigmoid { x } => {
                    let y = &self.nodes[i].value;
                    let delta = NdArray::from_fn(y.shape(), |j| {
                        let s = y.data()[j];
                        grad.data()[j] * s * (R::ONE - s)
                    });
                    pending.push((x, delta));
                }
                Op::Add { a, b } => {
                    pending.push((a, grad.clone()));
                    pending.push((b, grad.clone()));
                }
                Op::AddRow { x, bias } => {
                    let (n, e) = (grad.shape()[0], grad.shape()[1]);
                    let mut db = NdArray::zeros(&[e]);
                    for r in 0..n {
                        for j in 0..e {
                            db.data_mut()[j] += grad.row(r)[j];
                        }
                    }
                    pending.push((x, grad.clone()));
                    pending.push((bias, db));
                }
                Op::Mul { a, b } => {
                    let da = grad.zip_map(self.value(b), "mul_vjp", |g, v| g * v)?;
                    let db = grad.zip_map(self.value(a), "mul_vjp", |g, v| g * v)?;
                    pending.push((a, da));
                    pending.push((b, db));
                }
                Op::MulChannel { x, gate } => {
                    let xv = self.value(x);
                    let gv = self.value(gate);
                    let c = gv.shape()[0];
                    let dx = NdArray::from_fn(xv.shape(), |j| grad.data()[j] * gv.data()[j % c]);
                    let mut dg = NdArray::zeros(&[c]);
                    for j in 0..xv.len() {
                        dg.data_mut()[j % c] += grad.data()[j] * xv.data()[j];
                    }
                    pending.push((x, dx));
                    pending.push((gate, dg));
                }
                Op::Scale { x, factor } => {
                    pending.push((x, grad.map(|g| g * factor)));
                }
                Op::ReduceMean { x, axes } => {
                    let xv = self.value(x);
                    pending.push((x, reduce_mean_vjp(xv.shape(), &grad, &axes)));
                }
                Op::Reshape { x } => {
                    let delta = grad.reshape(self.value(x).shape())?;
                    pending.push((x, delta));
                }
                Op::SliceIndex { x, index } => {
                    let xv = self.value(x);
                    let inner: usize = xv.shape()[1..].iter().product();
                    let mut dx = NdArray::zeros(xv.shape());
                    dx.data_mut()[index * inner..(index + 1) * inner].copy_from_slice(grad.data());
                    pending.push((x, dx));
                }
                Op::Stack { parts } => {
                    let inner: usize = grad.shape()[1..].iter().product();
                    for (k, &p) in parts.iter().enumerate() {
                        let slice = grad.data()[k * inner..(k + 1) * inner].to_vec();
                        let delta = NdArray::from_vec(self.value(p).shape(), slice)?;
                        pending.push((p, delta));
                    }
                }
                Op::ConcatRows { parts } => {
                    let cols = grad.shape()[1];
                    let mut row_off = 0;
                    for &p in &parts {
                        let pr = self.value(p).shape()[0];
                        let slice = grad.data()[row_off * cols..(row_off + pr) * cols].to_vec();
                        pending.push((p, NdArray::from_vec(&[pr, cols], slice)?));
                        row_off += pr;
                    }
                }
                Op::ConcatCols { parts } => {
                    let rows = grad.shape()[0];
                    let mut col_off = 0;
                    for &p in &parts {
                        let pc = self.value(p).shape()[1];
                        let mut delta = NdArray::zeros(&[rows, pc]);
                        for r in 0..rows {
                            delta
                                .row_mut(r)
                                .copy_from_slice(&grad.row(r)[col_off..col_off + pc]);
                        }
                        pending.push((p, delta));
                        col_off += pc;
                    }
                }
                Op::CosineRows { a, b } => {
                    let (da, db) = cosine_rows_vjp(self.value(a), self.value(b), &grad);
                    pending.push((a, da));
                    pending.push((b, db));
                }
                Op::CrossEntropy { logits, labels } => {
                    let lv = self.value(logits);
                    let probs = softmax_kernel(lv, 1);
                    let n = labels.len();
                    let g = grad.data()[0] / R::from_f64(n as f64);
                    let mut delta = probs;
                    for (r, &label) in labels.iter().enumerate() {
                        let row = delta.row_mut(r);
                        row[label] -= R::ONE;
                        for v in row.iter_mut() {
                            *v *= g;
                        }
                    }
                    pending.push((logits, delta));
                }
            }
            for (id, delta) in pending.drain(..) {
                self.add_grad(id, delta)?;
            }
        }
        Ok(())
    }

    fn add_grad(&mut self, id: NodeId, delta: NdArray<R>) -> Result<()> {
        match &mut self.nodes[id.0].grad {
            Some(g) => g.add_assign(&delta),
            slot @ None => {
                *slot = Some(delta);
                Ok(())
            }
        }
    }
}

// ---- shared kernels ------------------------------------------------------

pub(crate) fn matmul_kernel<R: Real>(a: &NdArray<R>, b: &NdArray<R>) -> NdArray<R> {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = b.shape()[1];
    let mut out = NdArray::zeros(&[m, n]);
    for i in 0..m {
        for kk in 0..k {
            let aik = a.data()[i * k + kk];
            let brow = &b.data()[kk * n..(kk + 1) * n];
            let orow = &mut out.data_mut()[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += aik * brow[j];
            }
        }
    }
    out
}

pub(crate) fn transpose_kernel<R: Real>(x: &NdArray<R>) -> NdArray<R> {
    let (m, n) = (x.shape()[0], x.shape()[1]);
    let mut out = NdArray::zeros(&[n, m]);
    for i in 0..m {
        for j in 0..n {
            out.data_mut()[j * m + i] = x.data()[i * n + j];
        }
    }
    out
}

pub(crate) fn softmax_kernel<R: Real>(x: &NdArray<R>, axis: usize) -> NdArray<R> {
    let shape = x.shape();
    let axis_len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = x.clone();
    for o in 0..outer {
        for i in 0..inner {
            let start = o * axis_len * inner + i;
            let mut m = out.data()[start];
            for k in 1..axis_len {
                m = m.maximum(out.data()[start + k * inner]);
            }
            let mut sum = R::ZERO;
            for k in 0..axis_len {
                let idx = start + k * inner;
                let e = (out.data()[idx] - m).exp();
                out.data_mut()[idx] = e;
                sum += e;
            }
            for k in 0..axis_len {
                let idx = start + k * inner;
                out.data_mut()[idx] = out.data()[idx] / sum;
            }
        }
    }
    out
}

fn softmax_vjp<R: Real>(y: &NdArray<R>, dy: &NdArray<R>, axis: usize) -> NdArray<R> {
    let shape = y.shape();
    let axis_len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut dx = NdArray::zeros(shape);
    for o in 0..outer {
        for i in 0..inner {
            let start = o * axis_len * inner + i;
            let mut s = R::ZERO;
            for k in 0..axis_len {
                let idx = start + k * inner;
                s += dy.data()[idx] * y.data()[idx];
            }
            for k in 0..axis_len {
                let idx = start + k * inner;
                dx.data_mut()[idx] = y.data()[idx] * (dy.data()[idx] - s);
            }
        }
    }
    dx
}

fn reduce_mean_kernel<R: Real>(x: &NdArray<R>, axes: &[usize]) -> NdArray<R> {
    let in_shape = x.shape();
    let rank = in_shape.len();
    let keep: Vec<usize> = (0..rank).filter(|d| !axes.contains(d)).collect();
    let out_shape: Vec<usize> = if keep.is_empty() {
        vec![1]
    } else {
        keep.iter().map(|&d| in_shape[d]).collect()
    };
    let count: usize = axes.iter().map(|&d| in_shape[d]).product();
    let in_strides = strides_of(in_shape);
    let out_strides = strides_of(&out_shape);
    let mut out = NdArray::zeros(&out_shape);
    for flat in 0..x.len() {
        let mut out_flat = 0;
        for (k, &d) in keep.iter().enumerate() {
            out_flat += ((flat / in_strides[d]) % in_shape[d]) * out_strides[k];
        }
        out.data_mut()[out_flat] += x.data()[flat];
    }
    let inv = R::ONE / R::from_f64(count as f64);
    for v in out.data_mut() {
        *v *= inv;
    }
    out
}

fn reduce_mean_vjp<R: Real>(in_shape: &[usize], dy: &NdArray<R>, axes: &[usize]) -> NdArray<R> {
    let rank = in_shape.len();
    let keep: Vec<usize> = (0..rank).filter(|d| !axes.contains(d)).collect();
    let out_shape: Vec<usize> = if keep.is_empty() {
        vec![1]
    } else {
        keep.iter().map(|&d| in_shape[d]).collect()
    };
    let count: usize = axes.iter().map(|&d| in_shape[d]).product();
    let in_strides = strides_of(in_shape);
    let out_strides = strides_of(&out_shape);
    let inv = R::ONE / R::from_f64(count as f64);
    NdArray::from_fn(in_shape, |flat| {
        let mut out_flat = 0;
        for (k, &d) in keep.iter().enumerate() {
            out_flat += ((flat / in_strides[d]) % in_shape[d]) * out_strides[k];
        }
        dy.data()[out_flat] * inv
    })
}

fn sigmoid_scalar<R: Real>(x: R) -> R {
    // Split on sign so exp never overflows.
    if x >= R::ZERO {
        R::ONE / (R::ONE + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::ONE + e)
    }
}

fn row_products<R: Real>(a: &[R], b: &[R]) -> (R, R, R) {
    let mut dot = R::ZERO;
    let mut na2 = R::ZERO;
    let mut nb2 = R::ZERO;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na2 += x * x;
        nb2 += y * y;
    }
    (dot, na2, nb2)
}

fn cosine_rows_vjp<R: Real>(
    a: &NdArray<R>,
    b: &NdArray<R>,
    dy: &NdArray<R>,
) -> (NdArray<R>, NdArray<R>) {
    let (n, c) = (a.shape()[0], a.shape()[1]);
    let eps = R::from_f64(COSINE_EPS);
    let mut da = NdArray::zeros(&[n, c]);
    let mut db = NdArray::zeros(&[n, c]);
    for r in 0..n {
        let g = dy.data()[r];
        let (ar, br) = (a.row(r), b.row(r));
        let (dot, na2, nb2) = row_products(ar, br);
        let (na, nb) = (na2.sqrt(), nb2.sqrt());
        let prod = na * nb;
        if prod > eps {
            let cosv = dot / prod;
            for j in 0..c {
                da.row_mut(r)[j] = g * (br[j] / prod - cosv * ar[j] / na2);
                db.row_mut(r)[j] = g * (ar[j] / prod - cosv * br[j] / nb2);
            }
        } else {
            // Denominator pinned at eps: d(dot/eps) only.
            for j in 0..c {
                da.row_mut(r)[j] = g * br[j] / eps;
                db.row_mut(r)[j] = g * ar[j] / eps;
            }
        }
    }
    (da, db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn arr(shape: &[usize], data: Vec<f64>) -> NdArray<f64> {
        NdArray::from_vec(shape, data).unwrap()
    }

    #[test]
    fn sum_of_squares_gradient_is_2x() {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(arr(&[4], vec![1.0, -2.0, 3.0, 0.5]));
        let x2 = tape.reshape(x, &[4, 1]).unwrap();
        let sq = tape.mul(x2, x2).unwrap();
        let mean = tape.reduce_mean(sq, &[0, 1]).unwrap();
        let loss = tape.scale(mean, 4.0).unwrap(); // sum = mean * n
        let mut params = ParamSet::new();
        tape.backward(loss, &mut params).unwrap();
        let g = tape.grad(x).unwrap();
        assert_eq!(g.data(), &[2.0, -4.0, 6.0, 1.0]);
    }

    #[test]
    fn softmax_matches_reference_and_sums_to_one() {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(arr(&[1, 3], vec![1.0, 2.0, 3.0]));
        let y = tape.softmax(x, 1).unwrap();
        // Reference values computed independently for softmax([1,2,3]).
        let expect = [0.09003057317038046, 0.24472847105479767, 0.6652409557748219];
        for (got, want) in tape.value(y).data().iter().zip(expect) {
            assert_relative_eq!(*got, want, max_relative = 1e-12);
        }
        let sum: f64 = tape.value(y).data().iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn softmax_is_stable_for_huge_logits() {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(arr(&[1, 3], vec![1e4, 1e4 + 1.0, 1e4 - 2.0]));
        let y = tape.softmax(x, 1).unwrap();
        assert!(tape.value(y).is_all_finite());
        let sum: f64 = tape.value(y).data().iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_of_uniform_logits_is_ln_c() {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(NdArray::zeros(&[2, 5]));
        let ce = tape.cross_entropy(x, &[0, 3]).unwrap();
        // ln 5, frozen from an independent evaluation.
        assert_relative_eq!(
            tape.value(ce).data()[0],
            1.6094379124341003,
            epsilon = 1e-12
        );
    }

    #[test]
    fn cross_entropy_rejects_bad_labels() {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(NdArray::zeros(&[2, 5]));
        assert!(matches!(
            tape.cross_entropy(x, &[0, 5]),
            Err(Error::LabelOutOfRange {
                label: 5,
                classes: 5
            })
        ));
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(arr(&[1, 3], vec![-1.0, 0.0, 2.0]));
        let y = tape.relu(x).unwrap();
        let loss = tape.reduce_mean(y, &[0, 1]).unwrap();
        let mut params = ParamSet::new();
        tape.backward(loss, &mut params).unwrap();
        let g = tape.grad(x).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0 / 3.0]);
    }

    #[test]
    fn sigmoid_saturation_stays_finite() {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(arr(&[1, 2], vec![500.0, -500.0]));
        let y = tape.sigmoid(x).unwrap();
        assert!(tape.value(y).is_all_finite());
        let loss = tape.reduce_mean(y, &[0, 1]).unwrap();
        let mut params = ParamSet::new();
        tape.backward(loss, &mut params).unwrap();
        assert!(tape.grad(x).unwrap().is_all_finite());
    }

    #[test]
    fn matmul_is_associative_within_tolerance() {
        let mut rng = crate::rng::Rng::new(77);
        let mk = |rng: &mut crate::rng::Rng, m: usize, n: usize| {
            NdArray::from_fn(&[m, n], |_| rng.uniform(-1.0, 1.0))
        };
        let a = mk(&mut rng, 4, 5);
        let b = mk(&mut rng, 5, 6);
        let c = mk(&mut rng, 6, 3);
        let left = matmul_kernel(&matmul_kernel(&a, &b), &c);
        let right = matmul_kernel(&a, &matmul_kernel(&b, &c));
        assert!(left.max_abs_diff(&right) < 1e-6);
    }

    #[test]
    fn matmul_rejects_inner_mismatch() {
        let mut tape = Tape::<f64>::new();
        let a = tape.input(NdArray::zeros(&[2, 3]));
        let b = tape.input(NdArray::zeros(&[4, 2]));
        let err = tape.matmul(a, b).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { op: "matmul", .. }));
    }

    #[test]
    fn param_node_is_cached_and_grads_accumulate() {
        let mut params = ParamSet::new();
        let w = params.add("w", arr(&[1, 1], vec![3.0]), true);
        let mut tape = Tape::<f64>::new();
        let n1 = tape.param(&params, w);
        let n2 = tape.param(&params, w);
        assert_eq!(n1, n2);
        // loss = w*w -> dloss/dw = 2w = 6
        let prod = tape.mul(n1, n2).unwrap();
        let loss = tape.reduce_mean(prod, &[0, 1]).unwrap();
        tape.backward(loss, &mut params).unwrap();
        assert_relative_eq!(params.grad(w).data()[0], 6.0);
        // A second backward accumulates on top.
        let mut tape2 = Tape::<f64>::new();
        let n = tape2.param(&params, w);
        let prod = tape2.mul(n, n).unwrap();
        let loss = tape2.reduce_mean(prod, &[0, 1]).unwrap();
        tape2.backward(loss, &mut params).unwrap();
        assert_relative_eq!(params.grad(w).data()[0], 12.0);
        params.zero_grads();
        assert_eq!(params.grad(w).data()[0], 0.0);
    }

    #[test]
    fn frozen_params_receive_no_grad() {
        let mut params = ParamSet::new();
        let w = params.add("w", arr(&[1, 1], vec![3.0]), false);
        let mut tape = Tape::<f64>::new();
        let n = tape.param(&params, w);
        let prod = tape.mul(n, n).unwrap();
        let loss = tape.reduce_mean(prod, &[0, 1]).unwrap();
        tape.backward(loss, &mut params).unwrap();
        assert_eq!(params.grad(w).data()[0], 0.0);
    }

    #[test]
    fn backward_requires_scalar_loss() {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(NdArray::zeros(&[2, 2]));
        let mut params = ParamSet::new();
        assert!(matches!(
            tape.backward(x, &mut params),
            Err(Error::NonScalarLoss { .. })
        ));
    }

    #[test]
    fn stack_slice_roundtrip_and_grads() {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(arr(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let r0 = tape.slice_index(x, 0).unwrap();
        let r1 = tape.slice_index(x, 1).unwrap();
        let restacked = tape.stack(&[r0, r1]).unwrap();
        assert_eq!(tape.value(restacked).data(), tape.value(x).data());
        let mean = tape.reduce_mean(restacked, &[0, 1]).unwrap();
        let mut params = ParamSet::new();
        tape.backward(mean, &mut params).unwrap();
        let g = tape.grad(x).unwrap();
        assert!(g.data().iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn concat_cols_matches_layout() {
        let mut tape = Tape::<f64>::new();
        let a = tape.input(arr(&[2, 1], vec![1.0, 3.0]));
        let b = tape.input(arr(&[2, 2], vec![10.0, 20.0, 30.0, 40.0]));
        let cat = tape.concat_cols(&[a, b]).unwrap();
        assert_eq!(tape.value(cat).shape(), &[2, 3]);
        assert_eq!(tape.value(cat).data(), &[1.0, 10.0, 20.0, 3.0, 30.0, 40.0]);
    }

    #[test]
    fn cosine_rows_zero_vector_is_zero() {
        let mut tape = Tape::<f64>::new();
        let a = tape.input(arr(&[2, 3], vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
        let b = tape.input(arr(&[2, 3], vec![1.0, 2.0, 3.0, 2.0, 0.0, 0.0]));
        let cosv = tape.cosine_rows(a, b).unwrap();
        assert_eq!(tape.value(cosv).data()[0], 0.0);
        assert_relative_eq!(tape.value(cosv).data()[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reduce_mean_partial_axes() {
        let mut tape = Tape::<f64>::new();
        // shape (2,2,2): mean over axes {0,1} -> shape (2)
        let x = tape.input(arr(
            &[2, 2, 2],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
        ));
        let m = tape.reduce_mean(x, &[0, 1]).unwrap();
        assert_eq!(tape.value(m).shape(), &[2]);
        assert_eq!(tape.value(m).data(), &[4.0, 5.0]);
    }
}
