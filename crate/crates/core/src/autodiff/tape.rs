//! Define-by-run tape for reverse-mode differentiation.
//!
//! Every op appends a node holding its value and the information its
//! backward rule needs. Parents always precede children, so a single reverse
//! sweep over the node list is a valid topological order.
//!
//! Broadcasting of binary ops is limited to two cases: the right operand is a
//! scalar (shape `[1]`), or its shape equals the trailing axes of the left
//! operand (e.g. a bias row `[n]` against `[.., n]`, or a `[C, T]` constant
//! against `[B, C, T]`). Anything else is a dimension error.

use std::fmt;

use super::fault;
use super::gemm::{gemm, View};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Op identity, used for naming in reports and for fault injection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    Add,
    Sub,
    Mul,
    DivOrZero,
    Scale,
    Tanh,
    Silu,
    LeakyRelu,
    Dropout,
    MatMul,
    Transpose,
    Reshape,
    Sum,
    Mean,
    Min,
    Max,
    Softmax,
    Gather,
    Concat,
    Expand,
    Narrow,
    ChannelLinear,
}

impl OpKind {
    pub fn name(self) -> &'static str {
        match self {
            OpKind::Leaf => "leaf",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::DivOrZero => "div_or_zero",
            OpKind::Scale => "scale",
            OpKind::Tanh => "tanh",
            OpKind::Silu => "silu",
            OpKind::LeakyRelu => "leaky_relu",
            OpKind::Dropout => "dropout",
            OpKind::MatMul => "matmul",
            OpKind::Transpose => "transpose",
            OpKind::Reshape => "reshape",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::Min => "min",
            OpKind::Max => "max",
            OpKind::Softmax => "softmax",
            OpKind::Gather => "gather",
            OpKind::Concat => "concat",
            OpKind::Expand => "expand",
            OpKind::Narrow => "narrow",
            OpKind::ChannelLinear => "channel_linear",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UnaryOp {
    Tanh,
    Silu,
    LeakyRelu(f64),
    Scale(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    /// `a / b`, defined as 0 (with zero gradient) wherever `b == 0`.
    DivOrZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
    /// Subgradient flows to the first minimal element.
    Min,
    /// Subgradient flows to the first maximal element.
    Max,
}

#[derive(Clone, Copy, Debug)]
struct MatMulDims {
    batch: usize,
    m: usize,
    k: usize,
    n: usize,
    ta: bool,
    tb: bool,
    b_batched: bool,
}

impl MatMulDims {
    // Strides of op(A) (m×k) and op(B) (k×n) inside one batch slice.
    fn a_strides(&self) -> (usize, usize) {
        if self.ta {
            (1, self.m)
        } else {
            (self.k, 1)
        }
    }
    fn b_strides(&self) -> (usize, usize) {
        if self.tb {
            (1, self.k)
        } else {
            (self.n, 1)
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct AxisSplit {
    outer: usize,
    len: usize,
    inner: usize,
}

fn axis_split(shape: &[usize], axis: Option<usize>) -> AxisSplit {
    match axis {
        None => AxisSplit {
            outer: 1,
            len: shape.iter().product(),
            inner: 1,
        },
        Some(a) => AxisSplit {
            outer: shape[..a].iter().product(),
            len: shape[a],
            inner: shape[a + 1..].iter().product(),
        },
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Binary(BinaryOp, Var, Var),
    Unary(UnaryOp, Var),
    Dropout(Var, Vec<f64>),
    MatMul(Var, Var, MatMulDims),
    Transpose(Var),
    Reshape(Var),
    Reduce(ReduceOp, Var, AxisSplit, Vec<usize>),
    Softmax(Var, AxisSplit),
    Gather(Var, Vec<usize>),
    Concat(Vec<Var>),
    Expand(Var, AxisSplit),
    Narrow(Var, AxisSplit, usize),
    ChannelLinear(Var, Var, Var),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::Binary(BinaryOp::Add, ..) => OpKind::Add,
            Op::Binary(BinaryOp::Sub, ..) => OpKind::Sub,
            Op::Binary(BinaryOp::Mul, ..) => OpKind::Mul,
            Op::Binary(BinaryOp::DivOrZero, ..) => OpKind::DivOrZero,
            Op::Unary(UnaryOp::Tanh, _) => OpKind::Tanh,
            Op::Unary(UnaryOp::Silu, _) => OpKind::Silu,
            Op::Unary(UnaryOp::LeakyRelu(_), _) => OpKind::LeakyRelu,
            Op::Unary(UnaryOp::Scale(_), _) => OpKind::Scale,
            Op::Dropout(..) => OpKind::Dropout,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Transpose(_) => OpKind::Transpose,
            Op::Reshape(_) => OpKind::Reshape,
            Op::Reduce(ReduceOp::Sum, ..) => OpKind::Sum,
            Op::Reduce(ReduceOp::Mean, ..) => OpKind::Mean,
            Op::Reduce(ReduceOp::Min, ..) => OpKind::Min,
            Op::Reduce(ReduceOp::Max, ..) => OpKind::Max,
            Op::Softmax(..) => OpKind::Softmax,
            Op::Gather(..) => OpKind::Gather,
            Op::Concat(_) => OpKind::Concat,
            Op::Expand(..) => OpKind::Expand,
            Op::Narrow(..) => OpKind::Narrow,
            Op::ChannelLinear(..) => OpKind::ChannelLinear,
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

/// Single-owner computation record. Rebuilt for every forward pass.
pub struct Tape {
    nodes: Vec<Node>,
    rng: Option<Rng>,
    finite_check: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    /// Evaluation-mode tape: dropout is the identity.
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            rng: None,
            finite_check: cfg!(debug_assertions),
        }
    }

    /// Training-mode tape; dropout masks are drawn from `rng`.
    pub fn training(rng: Rng) -> Self {
        Self {
            rng: Some(rng),
            ..Self::new()
        }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    /// Toggle the debug-build assertion that finite inputs yield finite outputs.
    pub fn set_finite_check(&mut self, on: bool) {
        self.finite_check = on && cfg!(debug_assertions);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Kinds of all recorded ops, in tape order.
    pub fn op_kinds(&self) -> impl Iterator<Item = OpKind> + '_ {
        self.nodes.iter().map(|n| n.op.kind())
    }

    fn push(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        if self.finite_check && parents.iter().all(|p| self.nodes[p.0].value.is_finite()) {
            debug_assert!(
                value.is_finite(),
                "op {} produced non-finite output from finite inputs",
                op.kind()
            );
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    // ── elementwise ──────────────────────────────────────────────────

    /// The right operand repeats with period `numel(b)`.
    fn bcast(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb || sb == [1] || (sb.len() < sa.len() && sa.ends_with(sb)) {
            Ok(())
        } else {
            Err(Error::dim(op, sa, sb))
        }
    }

    pub fn binary(&mut self, op: BinaryOp, a: Var, b: Var) -> Result<Var> {
        let name = match op {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::DivOrZero => "div_or_zero",
        };
        self.bcast(name, a, b)?;
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (xa, xb) = (va.data(), vb.data());
        let nb = xb.len();
        let f: fn(f64, f64) -> f64 = match op {
            BinaryOp::Add => |x, y| x + y,
            BinaryOp::Sub => |x, y| x - y,
            BinaryOp::Mul => |x, y| x * y,
            BinaryOp::DivOrZero => |x, y| if y == 0.0 { 0.0 } else { x / y },
        };
        let data: Vec<f64> = xa
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, xb[i % nb]))
            .collect();
        let out = Tensor::from_parts(va.shape().to_vec(), data);
        Ok(self.push(out, Op::Binary(op, a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Mul, a, b)
    }

    pub fn div_or_zero(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::DivOrZero, a, b)
    }

    pub fn unary(&mut self, op: UnaryOp, x: Var) -> Var {
        let v = &self.nodes[x.0].value;
        let out = match op {
            UnaryOp::Tanh => v.map(f64::tanh),
            UnaryOp::Silu => v.map(|z| z / (1.0 + (-z).exp())),
            UnaryOp::LeakyRelu(alpha) => v.map(|z| if z > 0.0 { z } else { alpha * z }),
            UnaryOp::Scale(c) => v.map(|z| c * z),
        };
        self.push(out, Op::Unary(op, x), &[x])
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(UnaryOp::Tanh, x)
    }

    pub fn silu(&mut self, x: Var) -> Var {
        self.unary(UnaryOp::Silu, x)
    }

    pub fn leaky_relu(&mut self, x: Var, alpha: f64) -> Var {
        self.unary(UnaryOp::LeakyRelu(alpha), x)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(UnaryOp::Scale(c), x)
    }

    /// Inverted dropout. Identity (the same `Var`) on an evaluation tape or
    /// when `p == 0`; survivors are scaled by `1/(1-p)` otherwise.
    pub fn dropout(&mut self, x: Var, p: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout probability {p} not in [0, 1)")));
        }
        let Some(rng) = self.rng.as_mut() else {
            return Ok(x);
        };
        if p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let n = self.nodes[x.0].value.numel();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.uniform() < p { 0.0 } else { keep })
            .collect();
        let v = &self.nodes[x.0].value;
        let data = v.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
        let out = Tensor::from_parts(v.shape().to_vec(), data);
        Ok(self.push(out, Op::Dropout(x, mask), &[x]))
    }

    // ── linear algebra ───────────────────────────────────────────────

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, b, false, false)
    }

    /// `op(a) · op(b)` where `op` optionally swaps the last two axes.
    ///
    /// Supported ranks: 2×2, 3×3 (equal batch), and 3×2 with `ta == false`
    /// (right operand shared across the batch).
    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let err = || Error::dim("matmul", &sa, &sb);
        let last2 = |s: &[usize], t: bool| {
            let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
            if t {
                (c, r)
            } else {
                (r, c)
            }
        };
        let (dims, out_shape) = match (sa.len(), sb.len()) {
            (2, 2) => {
                let (m, k) = last2(&sa, ta);
                let (k2, n) = last2(&sb, tb);
                if k != k2 {
                    return Err(err());
                }
                (
                    MatMulDims { batch: 1, m, k, n, ta, tb, b_batched: false },
                    vec![m, n],
                )
            }
            (3, 3) => {
                if sa[0] != sb[0] {
                    return Err(err());
                }
                let (m, k) = last2(&sa, ta);
                let (k2, n) = last2(&sb, tb);
                if k != k2 {
                    return Err(err());
                }
                (
                    MatMulDims { batch: sa[0], m, k, n, ta, tb, b_batched: true },
                    vec![sa[0], m, n],
                )
            }
            (3, 2) if !ta => {
                let (k2, n) = last2(&sb, tb);
                if sa[2] != k2 {
                    return Err(err());
                }
                (
                    MatMulDims { batch: 1, m: sa[0] * sa[1], k: sa[2], n, ta, tb, b_batched: false },
                    vec![sa[0], sa[1], n],
                )
            }
            _ => return Err(err()),
        };
        let d = dims;
        let mut out = vec![0.0; d.batch * d.m * d.n];
        {
            let xa = self.nodes[a.0].value.data();
            let xb = self.nodes[b.0].value.data();
            let (ars, acs) = d.a_strides();
            let (brs, bcs) = d.b_strides();
            for bi in 0..d.batch {
                let b_off = if d.b_batched { bi * d.k * d.n } else { 0 };
                gemm(
                    d.m,
                    d.k,
                    d.n,
                    1.0,
                    View::new(xa, bi * d.m * d.k, ars, acs),
                    View::new(xb, b_off, brs, bcs),
                    0.0,
                    &mut out,
                    bi * d.m * d.n,
                    d.n,
                    1,
                );
            }
        }
        let out = Tensor::from_parts(out_shape, out);
        Ok(self.push(out, Op::MatMul(a, b, dims), &[a, b]))
    }

    /// Swap the last two axes.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).transpose()?;
        Ok(self.push(out, Op::Transpose(x), &[x]))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).reshape(shape)?;
        Ok(self.push(out, Op::Reshape(x), &[x]))
    }

    // ── reductions ───────────────────────────────────────────────────

    /// Reduce over `axis` (removing it) or over everything when `None`.
    pub fn reduce(&mut self, op: ReduceOp, x: Var, axis: Option<usize>) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if let Some(a) = axis {
            if a >= shape.len() {
                return Err(Error::Domain(format!(
                    "reduce axis {a} out of range for shape {shape:?}"
                )));
            }
        }
        let sp = axis_split(&shape, axis);
        let src = self.value(x).data();
        let mut out = vec![0.0; sp.outer * sp.inner];
        let mut arg = Vec::new();
        if matches!(op, ReduceOp::Min | ReduceOp::Max) {
            arg = vec![0usize; sp.outer * sp.inner];
        }
        for o in 0..sp.outer {
            for i in 0..sp.inner {
                let at = |j: usize| src[(o * sp.len + j) * sp.inner + i];
                let slot = o * sp.inner + i;
                match op {
                    ReduceOp::Sum | ReduceOp::Mean => {
                        let s: f64 = (0..sp.len).map(at).sum();
                        out[slot] = if op == ReduceOp::Mean { s / sp.len as f64 } else { s };
                    }
                    ReduceOp::Min | ReduceOp::Max => {
                        let mut best = 0;
                        for j in 1..sp.len {
                            let better = if op == ReduceOp::Min {
                                at(j) < at(best)
                            } else {
                                at(j) > at(best)
                            };
                            if better {
                                best = j;
                            }
                        }
                        arg[slot] = best;
                        out[slot] = at(best);
                    }
                }
            }
        }
        let mut out_shape: Vec<usize> = match axis {
            None => vec![],
            Some(a) => shape.iter().enumerate().filter(|&(i, _)| i != a).map(|(_, &d)| d).collect(),
        };
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let out = Tensor::from_parts(out_shape, out);
        Ok(self.push(out, Op::Reduce(op, x, sp, arg), &[x]))
    }

    pub fn sum(&mut self, x: Var, axis: Option<usize>) -> Result<Var> {
        self.reduce(ReduceOp::Sum, x, axis)
    }

    pub fn mean(&mut self, x: Var, axis: Option<usize>) -> Result<Var> {
        self.reduce(ReduceOp::Mean, x, axis)
    }

    pub fn min(&mut self, x: Var, axis: Option<usize>) -> Result<Var> {
        self.reduce(ReduceOp::Min, x, axis)
    }

    pub fn max(&mut self, x: Var, axis: Option<usize>) -> Result<Var> {
        self.reduce(ReduceOp::Max, x, axis)
    }

    /// Numerically stable softmax along `axis`.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::Domain(format!(
                "softmax axis {axis} out of range for shape {shape:?}"
            )));
        }
        let sp = axis_split(&shape, Some(axis));
        let src = self.value(x).data();
        let mut out = vec![0.0; src.len()];
        for o in 0..sp.outer {
            for i in 0..sp.inner {
                let idx = |j: usize| (o * sp.len + j) * sp.inner + i;
                let mx = (0..sp.len).map(|j| src[idx(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for j in 0..sp.len {
                    let e = (src[idx(j)] - mx).exp();
                    out[idx(j)] = e;
                    z += e;
                }
                for j in 0..sp.len {
                    out[idx(j)] /= z;
                }
            }
        }
        let out = Tensor::from_parts(shape, out);
        Ok(self.push(out, Op::Softmax(x, sp), &[x]))
    }

    // ── indexing and layout ──────────────────────────────────────────

    /// Row lookup: `table[V×D]`, `indices` → `[indices.len() × D]`.
    pub fn gather(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let shape = self.shape(table).to_vec();
        if shape.len() != 2 {
            return Err(Error::dim("gather", &shape, &[]));
        }
        if indices.is_empty() {
            return Err(Error::Domain("gather with no indices".into()));
        }
        let (v, d) = (shape[0], shape[1]);
        if let Some(&bad) = indices.iter().find(|&&i| i >= v) {
            return Err(Error::Data(format!("gather index {bad} >= table rows {v}")));
        }
        let src = self.value(table).data();
        let mut out = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            out.extend_from_slice(&src[i * d..(i + 1) * d]);
        }
        let out = Tensor::from_parts(vec![indices.len(), d], out);
        Ok(self.push(out, Op::Gather(table, indices.to_vec()), &[table]))
    }

    /// Concatenate along the last axis; leading axes must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Domain("concat of zero tensors".into()))?;
        let lead = {
            let s = self.shape(*first);
            s[..s.len() - 1].to_vec()
        };
        let mut width = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.len() != lead.len() + 1 || s[..s.len() - 1] != lead[..] {
                return Err(Error::dim("concat", self.shape(*first), s));
            }
            width += s[s.len() - 1];
        }
        let rows: usize = lead.iter().product();
        let mut out = vec![0.0; rows * width];
        let mut col = 0;
        for &p in parts {
            let v = self.value(p);
            let w = v.shape()[v.rank() - 1];
            for r in 0..rows {
                out[r * width + col..r * width + col + w].copy_from_slice(&v.data()[r * w..(r + 1) * w]);
            }
            col += w;
        }
        let mut shape = lead;
        shape.push(width);
        let out = Tensor::from_parts(shape, out);
        Ok(self.push(out, Op::Concat(parts.to_vec()), parts))
    }

    /// Repeat a size-1 `axis` `n` times.
    pub fn expand(&mut self, x: Var, axis: usize, n: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || shape[axis] != 1 || n == 0 {
            return Err(Error::dim("expand", &shape, &[axis, n]));
        }
        let sp = axis_split(&shape, Some(axis));
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(src.len() * n);
        for o in 0..sp.outer {
            let row = &src[o * sp.inner..(o + 1) * sp.inner];
            for _ in 0..n {
                out.extend_from_slice(row);
            }
        }
        let mut out_shape = shape;
        out_shape[axis] = n;
        let out = Tensor::from_parts(out_shape, out);
        let sp = AxisSplit { len: n, ..sp };
        Ok(self.push(out, Op::Expand(x, sp), &[x]))
    }

    /// Slice `len` entries starting at `start` along `axis`.
    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::dim("narrow", &shape, &[axis, start, len]));
        }
        let sp = axis_split(&shape, Some(axis));
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(sp.outer * len * sp.inner);
        for o in 0..sp.outer {
            let base = (o * sp.len + start) * sp.inner;
            out.extend_from_slice(&src[base..base + len * sp.inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let out = Tensor::from_parts(out_shape, out);
        Ok(self.push(out, Op::Narrow(x, sp, start), &[x]))
    }

    /// Per-channel affine map: `x[B,C,in]`, `w[C,out,in]`, `b[C,out]` → `[B,C,out]`.
    pub fn channel_linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (sx, sw, sb) = (
            self.shape(x).to_vec(),
            self.shape(w).to_vec(),
            self.shape(b).to_vec(),
        );
        if sx.len() != 3 || sw.len() != 3 || sb.len() != 2 {
            return Err(Error::dim("channel_linear", &sx, &sw));
        }
        let (bsz, c, din) = (sx[0], sx[1], sx[2]);
        let dout = sw[1];
        if sw[0] != c || sw[2] != din || sb != [c, dout] {
            return Err(Error::dim("channel_linear", &sx, &sw));
        }
        let mut out = vec![0.0; bsz * c * dout];
        let (xd, wd, bd) = (
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
        );
        for ch in 0..c {
            for bi in 0..bsz {
                out[(bi * c + ch) * dout..(bi * c + ch + 1) * dout]
                    .copy_from_slice(&bd[ch * dout..(ch + 1) * dout]);
            }
            gemm(
                bsz,
                din,
                dout,
                1.0,
                View::new(xd, ch * din, c * din, 1),
                View::new(wd, ch * dout * din, 1, din),
                1.0,
                &mut out,
                ch * dout,
                c * dout,
                1,
            );
        }
        let out = Tensor::from_parts(vec![bsz, c, dout], out);
        Ok(self.push(out, Op::ChannelLinear(x, w, b), &[x, w, b]))
    }

    // ── backward ─────────────────────────────────────────────────────

    /// Reverse sweep from a scalar `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.value(root).numel() != 1 {
            return Err(Error::Usage(format!(
                "backward root must be scalar, got shape {:?}",
                self.shape(root)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(vec![1.0]);
        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else {
                continue;
            };
            let node = &self.nodes[id];
            if node.requires_grad {
                match fault::factor(node.op.kind()) {
                    Some(f) => {
                        let scaled: Vec<f64> = g.iter().map(|v| v * f).collect();
                        self.backprop(node, &scaled, &mut grads);
                    }
                    None => self.backprop(node, &g, &mut grads),
                }
            }
            grads[id] = Some(g);
        }
        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, n)| {
                g.filter(|_| n.requires_grad)
                    .map(|g| Tensor::from_parts(n.value.shape().to_vec(), g))
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; node.value.numel()]))
    }

    fn backprop(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            &Op::Binary(op, a, b) => {
                let xa = self.value(a).data();
                let xb = self.value(b).data();
                let nb = xb.len();
                if let Some(ga) = self.slot(grads, a) {
                    for (i, gi) in g.iter().enumerate() {
                        let y = xb[i % nb];
                        ga[i] += match op {
                            BinaryOp::Add | BinaryOp::Sub => *gi,
                            BinaryOp::Mul => gi * y,
                            BinaryOp::DivOrZero => {
                                if y == 0.0 {
                                    0.0
                                } else {
                                    gi / y
                                }
                            }
                        };
                    }
                }
                if let Some(gb) = self.slot(grads, b) {
                    for (i, gi) in g.iter().enumerate() {
                        let (x, y) = (xa[i], xb[i % nb]);
                        gb[i % nb] += match op {
                            BinaryOp::Add => *gi,
                            BinaryOp::Sub => -gi,
                            BinaryOp::Mul => gi * x,
                            BinaryOp::DivOrZero => {
                                if y == 0.0 {
                                    0.0
                                } else {
                                    -gi * x / (y * y)
                                }
                            }
                        };
                    }
                }
            }
            &Op::Unary(op, x) => {
                let xv = self.value(x).data();
                let yv = node.value.data();
                if let Some(gx) = self.slot(grads, x) {
                    for i in 0..g.len() {
                        let d = match op {
                            UnaryOp::Tanh => 1.0 - yv[i] * yv[i],
                            UnaryOp::Silu => {
                                let s = 1.0 / (1.0 + (-xv[i]).exp());
                                s * (1.0 + xv[i] * (1.0 - s))
                            }
                            UnaryOp::LeakyRelu(alpha) => {
                                if xv[i] > 0.0 {
                                    1.0
                                } else {
                                    alpha
                                }
                            }
                            UnaryOp::Scale(c) => c,
                        };
                        gx[i] += g[i] * d;
                    }
                }
            }
            Op::Dropout(x, mask) => {
                if let Some(gx) = self.slot(grads, *x) {
                    for i in 0..g.len() {
                        gx[i] += g[i] * mask[i];
                    }
                }
            }
            &Op::MatMul(a, b, d) => {
                let (ars, acs) = d.a_strides();
                let (brs, bcs) = d.b_strides();
                let xa = self.value(a).data();
                let xb = self.value(b).data();
                if let Some(ga) = self.slot(grads, a) {
                    // d op(A) = G · op(B)ᵀ, written through op(A)'s strides.
                    for bi in 0..d.batch {
                        let b_off = if d.b_batched { bi * d.k * d.n } else { 0 };
                        gemm(
                            d.m,
                            d.n,
                            d.k,
                            1.0,
                            View::new(g, bi * d.m * d.n, d.n, 1),
                            View::new(xb, b_off, bcs, brs),
                            1.0,
                            ga,
                            bi * d.m * d.k,
                            ars,
                            acs,
                        );
                    }
                }
                if let Some(gb) = self.slot(grads, b) {
                    // d op(B) = op(A)ᵀ · G, accumulated across the batch when shared.
                    for bi in 0..d.batch {
                        let b_off = if d.b_batched { bi * d.k * d.n } else { 0 };
                        gemm(
                            d.k,
                            d.m,
                            d.n,
                            1.0,
                            View::new(xa, bi * d.m * d.k, acs, ars),
                            View::new(g, bi * d.m * d.n, d.n, 1),
                            1.0,
                            gb,
                            b_off,
                            brs,
                            bcs,
                        );
                    }
                }
            }
            &Op::Transpose(x) => {
                let s = node.value.shape();
                let r = s.len();
                let (rows, cols) = (s[r - 2], s[r - 1]);
                let batch = g.len() / (rows * cols);
                if let Some(gx) = self.slot(grads, x) {
                    for bi in 0..batch {
                        let base = bi * rows * cols;
                        for i in 0..rows {
                            for j in 0..cols {
                                gx[base + j * rows + i] += g[base + i * cols + j];
                            }
                        }
                    }
                }
            }
            &Op::Reshape(x) => {
                if let Some(gx) = self.slot(grads, x) {
                    gx.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                }
            }
            Op::Reduce(op, x, sp, arg) => {
                if let Some(gx) = self.slot(grads, *x) {
                    for o in 0..sp.outer {
                        for i in 0..sp.inner {
                            let slot = o * sp.inner + i;
                            let gi = g[slot];
                            match op {
                                ReduceOp::Sum | ReduceOp::Mean => {
                                    let s = if *op == ReduceOp::Mean { gi / sp.len as f64 } else { gi };
                                    for j in 0..sp.len {
                                        gx[(o * sp.len + j) * sp.inner + i] += s;
                                    }
                                }
                                ReduceOp::Min | ReduceOp::Max => {
                                    gx[(o * sp.len + arg[slot]) * sp.inner + i] += gi;
                                }
                            }
                        }
                    }
                }
            }
            &Op::Softmax(x, sp) => {
                let y = node.value.data();
                if let Some(gx) = self.slot(grads, x) {
                    for o in 0..sp.outer {
                        for i in 0..sp.inner {
                            let idx = |j: usize| (o * sp.len + j) * sp.inner + i;
                            let dot: f64 = (0..sp.len).map(|j| g[idx(j)] * y[idx(j)]).sum();
                            for j in 0..sp.len {
                                gx[idx(j)] += y[idx(j)] * (g[idx(j)] - dot);
                            }
                        }
                    }
                }
            }
            Op::Gather(table, indices) => {
                let d = self.shape(*table)[1];
                if let Some(gt) = self.slot(grads, *table) {
                    for (r, &i) in indices.iter().enumerate() {
                        for c in 0..d {
                            gt[i * d + c] += g[r * d + c];
                        }
                    }
                }
            }
            Op::Concat(parts) => {
                let s = node.value.shape();
                let width = s[s.len() - 1];
                let rows = g.len() / width;
                let mut col = 0;
                for &p in parts {
                    let ps = self.shape(p);
                    let w = ps[ps.len() - 1];
                    if let Some(gp) = self.slot(grads, p) {
                        for r in 0..rows {
                            for c in 0..w {
                                gp[r * w + c] += g[r * width + col + c];
                            }
                        }
                    }
                    col += w;
                }
            }
            &Op::Expand(x, sp) => {
                if let Some(gx) = self.slot(grads, x) {
                    for o in 0..sp.outer {
                        for j in 0..sp.len {
                            for i in 0..sp.inner {
                                gx[o * sp.inner + i] += g[(o * sp.len + j) * sp.inner + i];
                            }
                        }
                    }
                }
            }
            &Op::Narrow(x, sp, start) => {
                let len = node.value.shape().iter().product::<usize>() / (sp.outer * sp.inner);
                if let Some(gx) = self.slot(grads, x) {
                    for o in 0..sp.outer {
                        let src = o * len * sp.inner;
                        let dst = (o * sp.len + start) * sp.inner;
                        for t in 0..len * sp.inner {
                            gx[dst + t] += g[src + t];
                        }
                    }
                }
            }
            &Op::ChannelLinear(x, w, b) => {
                let sx = self.shape(x);
                let (bsz, c, din) = (sx[0], sx[1], sx[2]);
                let dout = self.shape(w)[1];
                let xd = self.value(x).data();
                let wd = self.value(w).data();
                if let Some(gx) = self.slot(grads, x) {
                    for ch in 0..c {
                        gemm(
                            bsz,
                            dout,
                            din,
                            1.0,
                            View::new(g, ch * dout, c * dout, 1),
                            View::new(wd, ch * dout * din, din, 1),
                            1.0,
                            gx,
                            ch * din,
                            c * din,
                            1,
                        );
                    }
                }
                if let Some(gw) = self.slot(grads, w) {
                    for ch in 0..c {
                        gemm(
                            dout,
                            bsz,
                            din,
                            1.0,
                            View::new(g, ch * dout, 1, c * dout),
                            View::new(xd, ch * din, c * din, 1),
                            1.0,
                            gw,
                            ch * dout * din,
                            din,
                            1,
                        );
                    }
                }
                if let Some(gb) = self.slot(grads, b) {
                    for bi in 0..bsz {
                        for t in 0..c * dout {
                            gb[t] += g[bi * c * dout + t];
                        }
                    }
                }
            }
        }
    }
}
