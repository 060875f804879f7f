//! Reverse-mode automatic differentiation over a linear operation tape.
//!
//! Every operation appends one node whose inputs were recorded earlier, so
//! the node order is already topological and `backward` is a single reverse
//! sweep. Leaves borrow their tensors for the lifetime of the tape, which
//! keeps large parameter matrices (embedding tables) from being copied on
//! every step.

use std::borrow::Cow;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{matmul, matmul_nt_acc, matmul_tn_acc, shape_err, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Act(Activation, Var),
    Conv1dSame {
        seq: Var,
        filters: Var,
        bias: Var,
    },
    MaxPoolTime {
        input: Var,
        argmax: Vec<usize>,
    },
    GlobalMaxPool {
        input: Var,
        argmax: Vec<usize>,
    },
    Mask {
        input: Var,
        mask: Vec<f64>,
    },
    Row {
        input: Var,
        row: usize,
    },
    Stack(Vec<Var>),
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    MeanRows(Var),
    Sum(Var),
    Mse {
        pred: Var,
        target: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    needs_grad: bool,
}

/// Ordered record of executed operations.
#[derive(Debug, Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<f64>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Registers a borrowed tensor. It participates in differentiation iff
    /// `t.requires_grad`.
    pub fn leaf(&mut self, t: &'a Tensor) -> Var {
        let needs_grad = t.requires_grad;
        self.nodes.push(Node {
            value: Cow::Borrowed(t),
            op: Op::Leaf,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Registers an owned tensor that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Registers an owned tensor that does receive a gradient.
    pub fn variable(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = ta.dims2().ok_or_else(|| shape_err("matmul", ta, tb))?;
        let (k2, n) = tb.dims2().ok_or_else(|| shape_err("matmul", ta, tb))?;
        if k != k2 {
            return Err(shape_err("matmul", ta, tb));
        }
        let out = Tensor::matrix(m, n, matmul(ta.data(), tb.data(), m, k, n))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::MatMul(a, b), ng))
    }

    fn zip_same(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(op_name, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, op, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `a[m×n] + bias[n]`, broadcast over rows.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        let (_, n) = ta.dims2().ok_or_else(|| shape_err("add_bias", ta, tb))?;
        if tb.numel() != n {
            return Err(shape_err("add_bias", ta, tb));
        }
        let mut data = ta.data().to_vec();
        for row in data.chunks_mut(n) {
            for (x, &b) in row.iter_mut().zip(tb.data()) {
                *x += b;
            }
        }
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        let ng = self.needs(a) || self.needs(bias);
        Ok(self.push(out, Op::AddBias(a, bias), ng))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| x * c).collect();
        let out = Tensor::new(ta.shape().to_vec(), data).expect("same shape");
        let ng = self.needs(a);
        self.push(out, Op::Scale(a, c), ng)
    }

    pub fn activation(&mut self, kind: Activation, x: Var) -> Var {
        let tx = self.value(x);
        let data = tx.data().iter().map(|&v| kind.apply(v)).collect();
        let out = Tensor::new(tx.shape().to_vec(), data).expect("same shape");
        let ng = self.needs(x);
        self.push(out, Op::Act(kind, x), ng)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.activation(Activation::Relu, x)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.activation(Activation::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.activation(Activation::Tanh, x)
    }

    /// Width-3 convolution over time with one zero frame of padding on each
    /// side, so the output has as many frames as the input.
    ///
    /// `seq[T×D]`, `filters[3×D×C]`, `bias[C]` → `[T×C]`.
    pub fn conv1d_same(&mut self, seq: Var, filters: Var, bias: Var) -> Result<Var> {
        let (ts, tf, tb) = (self.value(seq), self.value(filters), self.value(bias));
        let (t_len, d) = ts.dims2().ok_or_else(|| shape_err("conv1d_same", ts, tf))?;
        let (w, fd, c) = match tf.shape()[..] {
            [w, fd, c] => (w, fd, c),
            _ => return Err(shape_err("conv1d_same", ts, tf)),
        };
        if w != 3 {
            return Err(Error::invalid(format!(
                "conv1d_same requires filter width 3, got {w}"
            )));
        }
        if fd != d {
            return Err(shape_err("conv1d_same", ts, tf));
        }
        if tb.numel() != c {
            return Err(shape_err("conv1d_same", tf, tb));
        }
        if t_len == 0 {
            return Err(Error::SequenceTooShort {
                op: "conv1d_same",
                len: 0,
                need: 1,
            });
        }
        let (s, f) = (ts.data(), tf.data());
        let mut out = vec![0.0; t_len * c];
        for t in 0..t_len {
            let out_row = &mut out[t * c..(t + 1) * c];
            out_row.copy_from_slice(tb.data());
            for k in 0..3 {
                let Some(src) = (t + k).checked_sub(1).filter(|&src| src < t_len) else {
                    continue;
                };
                for (dd, &x) in s[src * d..(src + 1) * d].iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let f_row = &f[(k * d + dd) * c..(k * d + dd + 1) * c];
                    for (o, &fv) in out_row.iter_mut().zip(f_row) {
                        *o += x * fv;
                    }
                }
            }
        }
        let out = Tensor::matrix(t_len, c, out)?;
        let ng = self.needs(seq) || self.needs(filters) || self.needs(bias);
        Ok(self.push(out, Op::Conv1dSame { seq, filters, bias }, ng))
    }

    /// Windowed per-channel maximum over time. Output length is
    /// `(T - pool) / stride + 1`; the adjoint goes to the first maximum.
    pub fn max_pool_time(&mut self, input: Var, pool: usize, stride: usize) -> Result<Var> {
        if pool == 0 || stride == 0 {
            return Err(Error::invalid("pool and stride must be at least 1"));
        }
        let ti = self.value(input);
        let (t_len, c) = ti
            .dims2()
            .ok_or_else(|| Error::invalid("max_pool_time expects a [T×C] input"))?;
        if t_len < pool {
            return Err(Error::SequenceTooShort {
                op: "max_pool_time",
                len: t_len,
                need: pool,
            });
        }
        let out_len = (t_len - pool) / stride + 1;
        let x = ti.data();
        let mut out = vec![0.0; out_len * c];
        let mut argmax = vec![0; out_len * c];
        for o in 0..out_len {
            let start = o * stride;
            for ch in 0..c {
                let mut best = start;
                for t in start + 1..start + pool {
                    if x[t * c + ch] > x[best * c + ch] {
                        best = t;
                    }
                }
                out[o * c + ch] = x[best * c + ch];
                argmax[o * c + ch] = best;
            }
        }
        let out = Tensor::matrix(out_len, c, out)?;
        let ng = self.needs(input);
        Ok(self.push(out, Op::MaxPoolTime { input, argmax }, ng))
    }

    /// Per-channel maximum over all frames: `[T×C]` → `[C]`.
    pub fn global_max_pool(&mut self, input: Var) -> Result<Var> {
        let ti = self.value(input);
        let (t_len, c) = ti
            .dims2()
            .ok_or_else(|| Error::invalid("global_max_pool expects a [T×C] input"))?;
        if t_len == 0 {
            return Err(Error::SequenceTooShort {
                op: "global_max_pool",
                len: 0,
                need: 1,
            });
        }
        let x = ti.data();
        let mut out = x[..c].to_vec();
        let mut argmax = vec![0; c];
        for t in 1..t_len {
            for ch in 0..c {
                if x[t * c + ch] > out[ch] {
                    out[ch] = x[t * c + ch];
                    argmax[ch] = t;
                }
            }
        }
        let ng = self.needs(input);
        Ok(self.push(Tensor::vector(out), Op::GlobalMaxPool { input, argmax }, ng))
    }

    /// Inverted dropout. In eval mode, or with `p == 0`, this is the identity
    /// and records nothing.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        p: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid(format!(
                "dropout probability must lie in [0, 1), got {p}"
            )));
        }
        if mode == Mode::Eval || p == 0.0 {
            return Ok(x);
        }
        let keep_scale = 1.0 / (1.0 - p);
        let tx = self.value(x);
        let mask: Vec<f64> = (0..tx.numel())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep_scale })
            .collect();
        let data = tx.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = Tensor::new(tx.shape().to_vec(), data)?;
        let ng = self.needs(x);
        Ok(self.push(out, Op::Mask { input: x, mask }, ng))
    }

    /// Row `row` of a 2-D value as a `[1×n]` matrix.
    pub fn row(&mut self, input: Var, row: usize) -> Result<Var> {
        let ti = self.value(input);
        let (r, n) = ti
            .dims2()
            .ok_or_else(|| Error::invalid("row expects a 2-D input"))?;
        if row >= r {
            return Err(Error::invalid(format!("row {row} out of {r}")));
        }
        let out = Tensor::matrix(1, n, ti.row(row).to_vec())?;
        let ng = self.needs(input);
        Ok(self.push(out, Op::Row { input, row }, ng))
    }

    /// Stacks equally sized values as the rows of a `[B×n]` matrix.
    pub fn stack(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::invalid("stack of zero values"));
        };
        let n = self.value(first).numel();
        let mut data = Vec::with_capacity(n * parts.len());
        for &p in parts {
            let tp = self.value(p);
            if tp.numel() != n {
                return Err(shape_err("stack", self.value(first), tp));
            }
            data.extend_from_slice(tp.data());
        }
        let out = Tensor::matrix(parts.len(), n, data)?;
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(out, Op::Stack(parts.to_vec()), ng))
    }

    /// Selects rows of `table[V×D]`. Row 0 is the shared pad/OOV row and
    /// never receives a gradient.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tt = self.value(table);
        let (v, d) = tt
            .dims2()
            .ok_or_else(|| Error::invalid("gather expects a 2-D table"))?;
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(Error::invalid(format!("row id {id} out of {v}")));
            }
            data.extend_from_slice(tt.row(id));
        }
        let out = Tensor::matrix(ids.len(), d, data)?;
        let ng = self.needs(table);
        Ok(self.push(
            out,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            ng,
        ))
    }

    /// Mean over the rows of a `[T×D]` value → `[D]`.
    pub fn mean_rows(&mut self, input: Var) -> Result<Var> {
        let ti = self.value(input);
        let (t_len, d) = ti
            .dims2()
            .ok_or_else(|| Error::invalid("mean_rows expects a 2-D input"))?;
        if t_len == 0 {
            return Err(Error::SequenceTooShort {
                op: "mean_rows",
                len: 0,
                need: 1,
            });
        }
        let mut out = vec![0.0; d];
        for r in 0..t_len {
            for (o, &x) in out.iter_mut().zip(ti.row(r)) {
                *o += x;
            }
        }
        let inv = 1.0 / t_len as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        let ng = self.needs(input);
        Ok(self.push(Tensor::vector(out), Op::MeanRows(input), ng))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let s = self.value(input).data().iter().sum();
        let ng = self.needs(input);
        self.push(Tensor::scalar(s), Op::Sum(input), ng)
    }

    /// Mean squared error over every element of `pred`.
    pub fn mse(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let tp = self.value(pred);
        if tp.numel() != target.numel() || tp.numel() == 0 {
            return Err(shape_err("mse", tp, target));
        }
        let n = tp.numel() as f64;
        let loss = tp
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        let ng = self.needs(pred);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Mse {
                pred,
                target: target.data().to_vec(),
            },
            ng,
        ))
    }

    /// Replays adjoints from the scalar `loss` back to every leaf.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if !lt.is_scalar() {
            return Err(Error::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                lt.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i <= loss.0 && n.needs_grad).then(|| vec![0.0; n.value.numel()]))
            .collect();
        if let Some(g) = grads[loss.0].as_mut() {
            g[0] = 1.0;
        }

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node<'a>, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        // Each arm accumulates into inputs that need a gradient; constants have
        // `None` slots and are skipped.
        let val = |v: Var| self.nodes[v.0].value.as_ref();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (m, k) = ta.dims2().unwrap();
                let n = tb.dims2().unwrap().1;
                if let Some(ga) = grads[a.0].as_mut() {
                    matmul_nt_acc(g, tb.data(), m, k, n, ga);
                }
                if let Some(gb) = grads[b.0].as_mut() {
                    matmul_tn_acc(ta.data(), g, m, k, n, gb);
                }
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.iter().copied());
                accumulate(grads, *b, g.iter().copied());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.iter().copied());
                accumulate(grads, *b, g.iter().map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (da, db) = (val(*a).data(), val(*b).data());
                accumulate(grads, *a, g.iter().zip(db).map(|(x, y)| x * y));
                accumulate(grads, *b, g.iter().zip(da).map(|(x, y)| x * y));
            }
            Op::AddBias(a, bias) => {
                accumulate(grads, *a, g.iter().copied());
                if let Some(gb) = grads[bias.0].as_mut() {
                    let n = gb.len();
                    for row in g.chunks(n) {
                        for (o, x) in gb.iter_mut().zip(row) {
                            *o += x;
                        }
                    }
                }
            }
            Op::Scale(a, c) => accumulate(grads, *a, g.iter().map(|x| x * c)),
            Op::Act(kind, x) => {
                let (xs, ys) = (val(*x).data(), node.value.data());
                accumulate(
                    grads,
                    *x,
                    g.iter()
                        .zip(xs.iter().zip(ys))
                        .map(|(gv, (&xv, &yv))| gv * kind.derivative(xv, yv)),
                );
            }
            Op::Conv1dSame { seq, filters, bias } => {
                let (ts, tf) = (val(*seq), val(*filters));
                let (t_len, d) = ts.dims2().unwrap();
                let c = tf.shape()[2];
                let (s, f) = (ts.data(), tf.data());
                if let Some(gs) = grads[seq.0].as_mut() {
                    for t in 0..t_len {
                        let g_row = &g[t * c..(t + 1) * c];
                        for k in 0..3 {
                            let Some(src) = (t + k).checked_sub(1).filter(|&src| src < t_len)
                            else {
                                continue;
                            };
                            for dd in 0..d {
                                let f_row = &f[(k * d + dd) * c..(k * d + dd + 1) * c];
                                gs[src * d + dd] +=
                                    g_row.iter().zip(f_row).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                    }
                }
                if let Some(gf) = grads[filters.0].as_mut() {
                    for t in 0..t_len {
                        let g_row = &g[t * c..(t + 1) * c];
                        for k in 0..3 {
                            let Some(src) = (t + k).checked_sub(1).filter(|&src| src < t_len)
                            else {
                                continue;
                            };
                            for dd in 0..d {
                                let x = s[src * d + dd];
                                if x == 0.0 {
                                    continue;
                                }
                                let gf_row = &mut gf[(k * d + dd) * c..(k * d + dd + 1) * c];
                                for (o, gv) in gf_row.iter_mut().zip(g_row) {
                                    *o += x * gv;
                                }
                            }
                        }
                    }
                }
                if let Some(gb) = grads[bias.0].as_mut() {
                    for row in g.chunks(c) {
                        for (o, x) in gb.iter_mut().zip(row) {
                            *o += x;
                        }
                    }
                }
            }
            Op::MaxPoolTime { input, argmax } => {
                if let Some(gi) = grads[input.0].as_mut() {
                    let c = node.value.dims2().unwrap().1;
                    for (j, (&src_t, gv)) in argmax.iter().zip(g).enumerate() {
                        gi[src_t * c + j % c] += gv;
                    }
                }
            }
            Op::GlobalMaxPool { input, argmax } => {
                if let Some(gi) = grads[input.0].as_mut() {
                    let c = argmax.len();
                    for (ch, (&src_t, gv)) in argmax.iter().zip(g).enumerate() {
                        gi[src_t * c + ch] += gv;
                    }
                }
            }
            Op::Mask { input, mask } => {
                accumulate(grads, *input, g.iter().zip(mask).map(|(x, m)| x * m));
            }
            Op::Row { input, row } => {
                if let Some(gi) = grads[input.0].as_mut() {
                    let n = g.len();
                    for (o, x) in gi[row * n..(row + 1) * n].iter_mut().zip(g) {
                        *o += x;
                    }
                }
            }
            Op::Stack(parts) => {
                let n = g.len() / parts.len();
                for (p, chunk) in parts.iter().zip(g.chunks(n)) {
                    accumulate(grads, *p, chunk.iter().copied());
                }
            }
            Op::Gather { table, ids } => {
                if let Some(gt) = grads[table.0].as_mut() {
                    let d = node.value.dims2().unwrap().1;
                    for (&id, chunk) in ids.iter().zip(g.chunks(d.max(1))) {
                        if id == 0 {
                            continue;
                        }
                        for (o, x) in gt[id * d..(id + 1) * d].iter_mut().zip(chunk) {
                            *o += x;
                        }
                    }
                }
            }
            Op::MeanRows(input) => {
                if let Some(gi) = grads[input.0].as_mut() {
                    let d = g.len();
                    let inv = 1.0 / (gi.len() / d) as f64;
                    for row in gi.chunks_mut(d) {
                        for (o, x) in row.iter_mut().zip(g) {
                            *o += x * inv;
                        }
                    }
                }
            }
            Op::Sum(input) => {
                let gv = g[0];
                if let Some(gi) = grads[input.0].as_mut() {
                    gi.iter_mut().for_each(|o| *o += gv);
                }
            }
            Op::Mse { pred, target } => {
                let scale = 2.0 * g[0] / target.len() as f64;
                let p = val(*pred).data();
                accumulate(
                    grads,
                    *pred,
                    p.iter().zip(target).map(|(p, t)| scale * (p - t)),
                );
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, upd: impl Iterator<Item = f64>) {
    if let Some(gv) = grads[v.0].as_mut() {
        for (o, x) in gv.iter_mut().zip(upd) {
            *o += x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::matrix(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn activations_at_reference_points() {
        assert_eq!(Activation::Relu.apply(-1.5), 0.0);
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
    }

    #[test]
    fn power_rule_and_dead_relu() {
        let x = Tensor::scalar(3.0).with_grad();
        let mut tape = Tape::new();
        let v = tape.leaf(&x);
        let sq = tape.mul(v, v).unwrap();
        let grads = tape.backward(sq).unwrap();
        assert_eq!(grads.get(v).unwrap(), &[6.0]);

        let x = Tensor::scalar(-1.0).with_grad();
        let mut tape = Tape::new();
        let v = tape.leaf(&x);
        let r = tape.relu(v);
        let grads = tape.backward(r).unwrap();
        assert_eq!(grads.get(v).unwrap(), &[0.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let x = Tensor::zeros(&[2]).with_grad();
        let mut tape = Tape::new();
        let v = tape.leaf(&x);
        assert!(tape.backward(v).is_err());
    }

    #[test]
    fn conv_delta_kernel_is_identity() {
        let seq = m(4, 1, &[1.0, -2.0, 3.0, 0.5]);
        let filters = Tensor::new(vec![3, 1, 1], vec![0.0, 1.0, 0.0]).unwrap();
        let bias = Tensor::zeros(&[1]);
        let mut tape = Tape::new();
        let (s, f, b) = (tape.leaf(&seq), tape.leaf(&filters), tape.leaf(&bias));
        let out = tape.conv1d_same(s, f, b).unwrap();
        assert_eq!(tape.value(out).data(), seq.data());
    }

    #[test]
    fn conv_of_zero_sequence_is_zero() {
        let seq = Tensor::zeros(&[3, 2]);
        let filters = Tensor::new(vec![3, 2, 2], (0..12).map(f64::from).collect()).unwrap();
        let bias = Tensor::zeros(&[2]);
        let mut tape = Tape::new();
        let (s, f, b) = (tape.leaf(&seq), tape.leaf(&filters), tape.leaf(&bias));
        let out = tape.conv1d_same(s, f, b).unwrap();
        assert!(tape.value(out).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn conv_rejects_wrong_width() {
        let seq = Tensor::zeros(&[3, 1]);
        let filters = Tensor::zeros(&[5, 1, 1]);
        let bias = Tensor::zeros(&[1]);
        let mut tape = Tape::new();
        let (s, f, b) = (tape.leaf(&seq), tape.leaf(&filters), tape.leaf(&bias));
        assert!(tape.conv1d_same(s, f, b).is_err());
    }

    #[test]
    fn pooling_reference_cases() {
        let seq = m(3, 1, &[1.0, 3.0, 2.0]);
        let mut tape = Tape::new();
        let s = tape.leaf(&seq);
        let p = tape.max_pool_time(s, 2, 1).unwrap();
        assert_eq!(tape.value(p).data(), &[3.0, 3.0]);
        let id = tape.max_pool_time(s, 1, 1).unwrap();
        assert_eq!(tape.value(id).data(), seq.data());
        assert!(matches!(
            tape.max_pool_time(s, 4, 1),
            Err(Error::SequenceTooShort { .. })
        ));

        let seq = m(2, 2, &[1.0, 5.0, 4.0, 2.0]);
        let mut tape = Tape::new();
        let s = tape.leaf(&seq);
        let g = tape.global_max_pool(s).unwrap();
        assert_eq!(tape.value(g).data(), &[4.0, 5.0]);

        let empty = Tensor::zeros(&[0, 2]);
        let mut tape = Tape::new();
        let s = tape.leaf(&empty);
        assert!(tape.global_max_pool(s).is_err());
    }

    #[test]
    fn max_pool_ties_route_to_first_index() {
        let seq = m(2, 1, &[2.0, 2.0]).with_grad();
        let mut tape = Tape::new();
        let s = tape.leaf(&seq);
        let p = tape.max_pool_time(s, 2, 1).unwrap();
        let l = tape.sum(p);
        let grads = tape.backward(l).unwrap();
        assert_eq!(grads.get(s).unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn dropout_identity_cases_and_bad_probability() {
        let x = m(1, 3, &[1.0, 2.0, 3.0]);
        let mut rng = seed::rng(0);
        let mut tape = Tape::new();
        let v = tape.leaf(&x);
        assert_eq!(tape.dropout(v, 0.5, Mode::Eval, &mut rng).unwrap(), v);
        assert_eq!(tape.dropout(v, 0.0, Mode::Train, &mut rng).unwrap(), v);
        assert!(tape.dropout(v, 1.0, Mode::Train, &mut rng).is_err());
    }

    #[test]
    fn inverted_dropout_is_unbiased() {
        let n = 100_000;
        let x = Tensor::vector(vec![1.0; n]);
        let mut rng = seed::rng(42);
        let mut tape = Tape::new();
        let v = tape.leaf(&x);
        let d = tape.dropout(v, 0.5, Mode::Train, &mut rng).unwrap();
        let mean = tape.value(d).data().iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn gather_skips_reserved_row() {
        let table = m(3, 2, &[0.0, 0.0, 1.0, 2.0, 3.0, 4.0]).with_grad();
        let mut tape = Tape::new();
        let t = tape.leaf(&table);
        let g = tape.gather(t, &[0, 2, 2]).unwrap();
        let l = tape.sum(g);
        let grads = tape.backward(l).unwrap();
        assert_eq!(grads.get(t).unwrap(), &[0.0, 0.0, 0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn constants_get_no_gradient() {
        let w = m(1, 1, &[2.0]).with_grad();
        let x = m(1, 1, &[3.0]);
        let mut tape = Tape::new();
        let (wv, xv) = (tape.leaf(&w), tape.leaf(&x));
        let y = tape.matmul(xv, wv).unwrap();
        let l = tape.sum(y);
        let grads = tape.backward(l).unwrap();
        assert_eq!(grads.get(wv).unwrap(), &[3.0]);
        assert!(grads.get(xv).is_none());
    }
}
