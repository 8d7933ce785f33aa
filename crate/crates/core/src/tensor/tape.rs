//! Reverse-mode tape.
//!
//! Every operation appends a node holding its output value and the indices of
//! its inputs, so nodes are stored in topological order and `backward` is a
//! single reverse sweep. Parameters are borrowed, not copied, which is why
//! the tape carries the lifetime of the parameter storage.

use std::borrow::Cow;

use super::{Tensor, TensorError};
use crate::scalar::Real;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Deliberate defects in local gradient rules, used as negative controls for
/// the finite-difference checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradFault {
    /// Uses `1 - y` instead of `1 - y^2` as the derivative of `tanh`.
    TanhDerivative,
}

/// How the right operand of `add`/`sub`/`mul` is broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bcast {
    Same,
    /// One-element right operand.
    Scalar,
    /// Right operand matches the last axis of the left one.
    Row,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var, Bcast),
    Sub(Var, Var, Bcast),
    Mul(Var, Var, Bcast),
    Scale(Var, f64),
    AddScalar(Var),
    Concat { inputs: Vec<Var>, axis: usize },
    Slice { input: Var, axis: usize, start: usize },
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Sum(Var),
    Mean(Var),
    Clip { input: Var, lo: f64, hi: f64 },
    Minimum(Var, Var),
    Pick { input: Var, index: Vec<usize> },
}

struct Node<'a, T: Real> {
    value: Cow<'a, Tensor<T>>,
    op: Op,
    requires_grad: bool,
}

pub struct Tape<'a, T: Real> {
    nodes: Vec<Node<'a, T>>,
    fault: Option<GradFault>,
}

impl<T: Real> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros of `shape` when `v` did not influence the
    /// loss.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor<T> {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

fn shape_err(op: &'static str, a: &[usize], b: &[usize]) -> TensorError {
    TensorError::Shape {
        op,
        lhs: a.to_vec(),
        rhs: b.to_vec(),
    }
}

fn bcast_kind(op: &'static str, a: &[usize], b: &[usize]) -> Result<Bcast, TensorError> {
    let nb: usize = b.iter().product();
    if a == b {
        Ok(Bcast::Same)
    } else if nb == 1 {
        Ok(Bcast::Scalar)
    } else if b.len() == 1 && a.last() == Some(&b[0]) {
        Ok(Bcast::Row)
    } else {
        Err(shape_err(op, a, b))
    }
}

#[inline]
fn bidx(kind: Bcast, i: usize, row: usize) -> usize {
    match kind {
        Bcast::Same => i,
        Bcast::Scalar => 0,
        Bcast::Row => i % row,
    }
}

/// Reduces a gradient with the left operand's shape onto the right operand.
fn reduce_bcast<T: Real>(kind: Bcast, g: &Tensor<T>, b_shape: &[usize]) -> Tensor<T> {
    match kind {
        Bcast::Same => g.clone(),
        _ => {
            let mut out = Tensor::zeros(b_shape);
            let row = b_shape.iter().product::<usize>().max(1);
            for (i, &v) in g.data().iter().enumerate() {
                out.data_mut()[bidx(kind, i, row)] = out.data()[bidx(kind, i, row)] + v;
            }
            out
        }
    }
}

/// `(m, k, n, out_shape)` for a matrix product, treating a rank-1 left
/// operand as a row vector and a rank-1 right operand as a column vector.
fn matmul_dims(a: &[usize], b: &[usize]) -> Result<(usize, usize, usize, Vec<usize>), TensorError> {
    let (m, k1, a_vec) = match a.len() {
        1 => (1, a[0], true),
        2 => (a[0], a[1], false),
        _ => return Err(shape_err("matmul", a, b)),
    };
    let (k2, n, b_vec) = match b.len() {
        1 => (b[0], 1, true),
        2 => (b[0], b[1], false),
        _ => return Err(shape_err("matmul", a, b)),
    };
    if k1 != k2 {
        return Err(shape_err("matmul", a, b));
    }
    let out = match (a_vec, b_vec) {
        (true, true) => vec![],
        (true, false) => vec![n],
        (false, true) => vec![m],
        (false, false) => vec![m, n],
    };
    Ok((m, k1, n, out))
}

fn matmul_kernel<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); m * n];
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            for (cj, &bj) in crow.iter_mut().zip(brow) {
                *cj = *cj + av * bj;
            }
        }
    }
    c
}

/// `(outer, axis_len, inner)` decomposition around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn softmax_rows<T: Real>(x: &[T], row: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for (xr, or) in x.chunks(row).zip(out.chunks_mut(row)) {
        let mx = xr.iter().copied().fold(T::neg_infinity(), T::max);
        let mut s = T::zero();
        for (o, &v) in or.iter_mut().zip(xr) {
            *o = (v - mx).exp();
            s = s + *o;
        }
        for o in or.iter_mut() {
            *o = *o / s;
        }
    }
    out
}

fn log_softmax_rows<T: Real>(x: &[T], row: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for (xr, or) in x.chunks(row).zip(out.chunks_mut(row)) {
        let mx = xr.iter().copied().fold(T::neg_infinity(), T::max);
        let s = xr.iter().fold(T::zero(), |acc, &v| acc + (v - mx).exp());
        let lse = mx + s.ln();
        for (o, &v) in or.iter_mut().zip(xr) {
            *o = v - lse;
        }
    }
    out
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl<'a, T: Real> Tape<'a, T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            fault: None,
        }
    }

    /// A tape whose backward pass carries the given defect.
    pub fn with_fault(fault: GradFault) -> Self {
        Self {
            nodes: Vec::new(),
            fault: Some(fault),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Borrowed trainable parameter.
    pub fn param(&mut self, t: &'a Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(t),
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Borrowed tensor that does not receive gradients.
    pub fn constant_ref(&mut self, t: &'a Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(t),
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Owned leaf; `requires_grad` controls whether it receives a gradient.
    pub fn leaf(&mut self, t: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(t),
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.leaf(t, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        let (m, k, n, out_shape) = matmul_dims(av.shape(), bv.shape())?;
        let data = matmul_kernel(av.data(), bv.data(), m, k, n);
        Ok(self.push(Tensor::new(&out_shape, data)?, Op::MatMul(a, b), &[a, b]))
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        op: impl Fn(Var, Var, Bcast) -> Op,
    ) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        let kind = bcast_kind(name, av.shape(), bv.shape())?;
        let row = bv.numel().max(1);
        let data: Vec<T> = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, bv.data()[bidx(kind, i, row)]))
            .collect();
        let value = Tensor::new(av.shape(), data)?;
        Ok(self.push(value, op(a, b, kind), &[a, b]))
    }

    /// `a + b`, with `b` either the same shape, a single element, or a
    /// vector matching the last axis of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let k = T::lit(c);
        let v = self.value(a).map(|x| x * k);
        self.push(v, Op::Scale(a, c), &[a])
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let k = T::lit(c);
        let v = self.value(a).map(|x| x + k);
        self.push(v, Op::AddScalar(a), &[a])
    }

    /// Concatenation along `axis`; all other extents must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var, TensorError> {
        let first = inputs.first().ok_or(TensorError::Invalid {
            op: "concat",
            message: "no inputs".into(),
        })?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(TensorError::Invalid {
                op: "concat",
                message: format!("axis {axis} out of range for rank {}", base.len()),
            });
        }
        let mut total = 0;
        for v in inputs {
            let s = self.shape(*v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(shape_err("concat", &base, s));
            }
            total += s[axis];
        }
        let mut out_shape = base.clone();
        out_shape[axis] = total;
        let (outer, _, inner) = split_axis(&base, axis);
        let mut data = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            for v in inputs {
                let t = self.value(*v);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let value = Tensor::new(&out_shape, data)?;
        Ok(self.push(
            value,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            inputs,
        ))
    }

    /// Elements `start..start + len` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var, TensorError> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() || start + len > shape[axis] {
            return Err(TensorError::Invalid {
                op: "slice",
                message: format!("range {start}..{} on axis {axis} of {shape:?}", start + len),
            });
        }
        let (outer, n_axis, inner) = split_axis(&shape, axis);
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * n_axis * inner;
            data.extend_from_slice(&src[base + start * inner..base + (start + len) * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let value = Tensor::new(&out_shape, data)?;
        Ok(self.push(value, Op::Slice { input: a, axis, start }, &[a]))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.tanh());
        self.push(v, Op::Tanh(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(T::zero()));
        self.push(v, Op::Relu(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.exp());
        self.push(v, Op::Exp(a), &[a])
    }

    pub fn log(&mut self, a: Var) -> Result<Var, TensorError> {
        let t = self.value(a);
        if let Some(bad) = t.data().iter().find(|&&x| !(x > T::zero())) {
            return Err(TensorError::LogDomain(bad.as_f64()));
        }
        let v = t.map(|x| x.ln());
        Ok(self.push(v, Op::Log(a), &[a]))
    }

    /// Softmax along the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let data = softmax_rows(t.data(), t.last_dim());
        let v = Tensor {
            shape: t.shape().to_vec(),
            data,
        };
        self.push(v, Op::Softmax(a), &[a])
    }

    /// Log-softmax along the last axis, computed without forming the softmax.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let data = log_softmax_rows(t.data(), t.last_dim());
        let v = Tensor {
            shape: t.shape().to_vec(),
            data,
        };
        self.push(v, Op::LogSoftmax(a), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().fold(T::zero(), |acc, &x| acc + x);
        self.push(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().fold(T::zero(), |acc, &x| acc + x);
        let n = T::from_usize(t.numel().max(1)).expect("count fits scalar");
        self.push(Tensor::scalar(s / n), Op::Mean(a), &[a])
    }

    /// Elementwise clamp to `[lo, hi]`; the gradient passes only inside.
    pub fn clip_by_value(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let (l, h) = (T::lit(lo), T::lit(hi));
        let v = self.value(a).map(|x| x.max(l).min(h));
        self.push(v, Op::Clip { input: a, lo, hi }, &[a])
    }

    /// Elementwise minimum of two same-shape tensors; ties route the
    /// gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("minimum", av.shape(), bv.shape()));
        }
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(&x, &y)| if x <= y { x } else { y })
            .collect();
        let value = Tensor::new(av.shape(), data)?;
        Ok(self.push(value, Op::Minimum(a, b), &[a, b]))
    }

    /// Selects `a[r, index[r]]` from a `[rows, cols]` tensor (or `a[index[0]]`
    /// from a vector), giving a `[rows]` vector.
    pub fn pick(&mut self, a: Var, index: &[usize]) -> Result<Var, TensorError> {
        let t = self.value(a);
        let cols = t.last_dim();
        let rows = t.numel() / cols.max(1);
        if index.len() != rows || index.iter().any(|&i| i >= cols) {
            return Err(TensorError::Invalid {
                op: "pick",
                message: format!("{} indices for shape {:?}", index.len(), t.shape()),
            });
        }
        let data = index
            .iter()
            .enumerate()
            .map(|(r, &c)| t.data()[r * cols + c])
            .collect();
        let value = Tensor::vector(data);
        Ok(self.push(
            value,
            Op::Pick {
                input: a,
                index: index.to_vec(),
            },
            &[a],
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, TensorError> {
        let lv = self.value(loss);
        if lv.numel() != 1 {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(lv.shape(), T::one()));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        // Only gradients of nodes that require them are meaningful.
        for (g, n) in grads.iter_mut().zip(&self.nodes) {
            if !n.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, delta: Tensor<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(g) => {
                for (x, d) in g.data_mut().iter_mut().zip(delta.data()) {
                    *x = *x + *d;
                }
            }
            slot @ None => *slot = Some(delta),
        }
    }

    fn propagate(&self, idx: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let out = &*self.nodes[idx].value;
        let with = |t: &Tensor<T>, data: Vec<T>| Tensor {
            shape: t.shape().to_vec(),
            data,
        };
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n, _) = matmul_dims(av.shape(), bv.shape()).expect("checked in forward");
                let gd = g.data();
                if self.requires_grad(*a) {
                    let mut da = vec![T::zero(); m * k];
                    for i in 0..m {
                        for p in 0..k {
                            let brow = &bv.data()[p * n..(p + 1) * n];
                            let grow = &gd[i * n..(i + 1) * n];
                            da[i * k + p] = grow.iter().zip(brow).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
                        }
                    }
                    self.accumulate(grads, *a, with(av, da));
                }
                if self.requires_grad(*b) {
                    let mut db = vec![T::zero(); k * n];
                    for i in 0..m {
                        let grow = &gd[i * n..(i + 1) * n];
                        for p in 0..k {
                            let ap = av.data()[i * k + p];
                            let drow = &mut db[p * n..(p + 1) * n];
                            for (d, &x) in drow.iter_mut().zip(grow) {
                                *d = *d + ap * x;
                            }
                        }
                    }
                    self.accumulate(grads, *b, with(bv, db));
                }
            }
            Op::Add(a, b, kind) | Op::Sub(a, b, kind) => {
                let negate = matches!(self.nodes[idx].op, Op::Sub(..));
                self.accumulate(grads, *a, g.clone());
                if self.requires_grad(*b) {
                    let mut gb = reduce_bcast(*kind, g, self.shape(*b));
                    if negate {
                        gb = gb.map(|x| -x);
                    }
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Mul(a, b, kind) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let row = bv.numel().max(1);
                if self.requires_grad(*a) {
                    let da = g
                        .data()
                        .iter()
                        .enumerate()
                        .map(|(i, &x)| x * bv.data()[bidx(*kind, i, row)])
                        .collect();
                    self.accumulate(grads, *a, with(av, da));
                }
                if self.requires_grad(*b) {
                    let prod = with(
                        av,
                        g.data().iter().zip(av.data()).map(|(&x, &y)| x * y).collect(),
                    );
                    self.accumulate(grads, *b, reduce_bcast(*kind, &prod, bv.shape()));
                }
            }
            Op::Scale(a, c) => {
                let k = T::lit(*c);
                self.accumulate(grads, *a, g.map(|x| x * k));
            }
            Op::AddScalar(a) => self.accumulate(grads, *a, g.clone()),
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = split_axis(out.shape(), *axis);
                let mut offset = 0;
                for v in inputs {
                    let t = self.value(*v);
                    let len = t.shape()[*axis];
                    if self.requires_grad(*v) {
                        let mut d = Vec::with_capacity(t.numel());
                        for o in 0..outer {
                            let base = o * total * inner + offset * inner;
                            d.extend_from_slice(&g.data()[base..base + len * inner]);
                        }
                        self.accumulate(grads, *v, with(t, d));
                    }
                    offset += len;
                }
            }
            Op::Slice { input, axis, start } => {
                let t = self.value(*input);
                let (outer, n_axis, inner) = split_axis(t.shape(), *axis);
                let len = out.shape()[*axis];
                let mut d = vec![T::zero(); t.numel()];
                for o in 0..outer {
                    let dst = o * n_axis * inner + start * inner;
                    let src = o * len * inner;
                    d[dst..dst + len * inner].copy_from_slice(&g.data()[src..src + len * inner]);
                }
                self.accumulate(grads, *input, with(t, d));
            }
            Op::Sigmoid(a) => {
                let d = g
                    .data()
                    .iter()
                    .zip(out.data())
                    .map(|(&x, &y)| x * y * (T::one() - y))
                    .collect();
                self.accumulate(grads, *a, with(out, d));
            }
            Op::Tanh(a) => {
                let faulty = self.fault == Some(GradFault::TanhDerivative);
                let d = g
                    .data()
                    .iter()
                    .zip(out.data())
                    .map(|(&x, &y)| if faulty { x * (T::one() - y) } else { x * (T::one() - y * y) })
                    .collect();
                self.accumulate(grads, *a, with(out, d));
            }
            Op::Relu(a) => {
                let inp = self.value(*a);
                let d = g
                    .data()
                    .iter()
                    .zip(inp.data())
                    .map(|(&x, &v)| if v > T::zero() { x } else { T::zero() })
                    .collect();
                self.accumulate(grads, *a, with(out, d));
            }
            Op::Exp(a) => {
                let d = g.data().iter().zip(out.data()).map(|(&x, &y)| x * y).collect();
                self.accumulate(grads, *a, with(out, d));
            }
            Op::Log(a) => {
                let inp = self.value(*a);
                let d = g.data().iter().zip(inp.data()).map(|(&x, &v)| x / v).collect();
                self.accumulate(grads, *a, with(out, d));
            }
            Op::Softmax(a) => {
                let row = out.last_dim();
                let mut d = vec![T::zero(); out.numel()];
                for ((yr, gr), dr) in out.data().chunks(row).zip(g.data().chunks(row)).zip(d.chunks_mut(row)) {
                    let dot = yr.iter().zip(gr).fold(T::zero(), |acc, (&y, &x)| acc + y * x);
                    for ((o, &y), &x) in dr.iter_mut().zip(yr).zip(gr) {
                        *o = y * (x - dot);
                    }
                }
                self.accumulate(grads, *a, with(out, d));
            }
            Op::LogSoftmax(a) => {
                let row = out.last_dim();
                let mut d = vec![T::zero(); out.numel()];
                for ((yr, gr), dr) in out.data().chunks(row).zip(g.data().chunks(row)).zip(d.chunks_mut(row)) {
                    let gsum = gr.iter().fold(T::zero(), |acc, &x| acc + x);
                    for ((o, &y), &x) in dr.iter_mut().zip(yr).zip(gr) {
                        *o = x - y.exp() * gsum;
                    }
                }
                self.accumulate(grads, *a, with(out, d));
            }
            Op::Sum(a) => {
                let t = self.value(*a);
                self.accumulate(grads, *a, Tensor::full(t.shape(), g.item()));
            }
            Op::Mean(a) => {
                let t = self.value(*a);
                let n = T::from_usize(t.numel().max(1)).expect("count fits scalar");
                self.accumulate(grads, *a, Tensor::full(t.shape(), g.item() / n));
            }
            Op::Clip { input, lo, hi } => {
                let (l, h) = (T::lit(*lo), T::lit(*hi));
                let inp = self.value(*input);
                let d = g
                    .data()
                    .iter()
                    .zip(inp.data())
                    .map(|(&x, &v)| if v >= l && v <= h { x } else { T::zero() })
                    .collect();
                self.accumulate(grads, *input, with(inp, d));
            }
            Op::Minimum(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let mut da = vec![T::zero(); av.numel()];
                let mut db = vec![T::zero(); bv.numel()];
                for (i, &x) in g.data().iter().enumerate() {
                    if av.data()[i] <= bv.data()[i] {
                        da[i] = x;
                    } else {
                        db[i] = x;
                    }
                }
                self.accumulate(grads, *a, with(av, da));
                self.accumulate(grads, *b, with(bv, db));
            }
            Op::Pick { input, index } => {
                let t = self.value(*input);
                let cols = t.last_dim();
                let mut d = vec![T::zero(); t.numel()];
                for (r, &c) in index.iter().enumerate() {
                    d[r * cols + c] = g.data()[r];
                }
                self.accumulate(grads, *input, with(t, d));
            }
        }
    }
}
