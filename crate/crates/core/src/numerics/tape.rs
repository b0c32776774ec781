//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! Every primitive appends a node holding its output value and the indices
//! of its inputs. Nodes are only ever appended after their inputs, so the
//! node order is already topological and [`Tape::backward`] is a single
//! reverse sweep.

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{self, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Pointwise unary functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unary {
    Neg,
    Sigmoid,
    Tanh,
    Relu,
    Exp,
    Log,
}

/// Pointwise binary functions with row/column broadcasting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param { id: ParamId },
    Gather { id: ParamId, table_len: usize, rows: Vec<usize> },
    MatMul(Var, Var),
    Transpose(Var),
    Binary(Binary, Var, Var),
    Unary(Unary, Var),
    Scale(Var, f64),
    SoftmaxRows(Var),
    Concat { parts: Vec<Var>, axis: usize },
    SliceRows { x: Var, start: usize },
    SliceCols { x: Var, start: usize },
    MaxRows { x: Var, argmax: Vec<usize> },
    PairwiseAdd(Var, Var),
    Sum(Var),
    CrossEntropy { logits: Var, target: usize },
    BceWithLogits { logits: Var, targets: Vec<f64> },
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Record of primitive applications for one forward pass.
///
/// A tape is single-use: [`Tape::backward`] may run once; a second call is
/// an error.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Relu inputs within this distance of zero count as sitting on the kink.
pub const KINK_BAND: f64 = 1e-6;

impl Tape {
    pub fn new() -> Self {
        Self::default()
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    /// Leaf holding a copy of a trainable parameter.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).clone(), Op::Param { id })
    }

    /// Row lookup into a parameter table: output row `k` is `table[rows[k]]`.
    pub fn gather(&mut self, store: &ParamStore, id: ParamId, rows: &[usize]) -> Result<Var> {
        let table = store.get(id);
        let (n, d) = table.dims2();
        if rows.is_empty() {
            return Err(Error::Precondition("gather with no rows".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            if r >= n {
                return Err(Error::Shape(format!(
                    "row {r} out of range for table {} with {n} rows",
                    store.name(id)
                )));
            }
            data.extend_from_slice(table.row(r));
        }
        let value = Tensor::from_parts(vec![rows.len(), d], data);
        Ok(self.push(value, Op::Gather { id, table_len: table.len(), rows: rows.to_vec() }))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (m, k) = av.dims2();
        let (k2, n) = bv.dims2();
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul of {:?} and {:?}: inner dimensions differ",
                av.shape(),
                bv.shape()
            )));
        }
        let mut out = vec![0.0; m * n];
        tensor::matmul_raw(av.data(), bv.data(), m, k, n, &mut out);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let (r, c) = xv.dims2();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = xv.data()[i * c + j];
            }
        }
        self.push(Tensor::from_parts(vec![c, r], out), Op::Transpose(x))
    }

    pub fn binary(&mut self, op: Binary, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let plan = Broadcast::plan(av, bv)?;
        let mut out = Vec::with_capacity(plan.rows * plan.cols);
        for i in 0..plan.rows {
            for j in 0..plan.cols {
                let x = av.data()[plan.a_index(i, j)];
                let y = bv.data()[plan.b_index(i, j)];
                out.push(match op {
                    Binary::Add => x + y,
                    Binary::Sub => x - y,
                    Binary::Mul => x * y,
                });
            }
        }
        let shape = plan.out_shape.clone();
        Ok(self.push(Tensor::from_parts(shape, out), Op::Binary(op, a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn unary(&mut self, op: Unary, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if op == Unary::Log {
            if let Some(bad) = xv.data().iter().find(|&&v| v <= 0.0 || v.is_nan()) {
                return Err(Error::Domain(format!("log of non-positive value {bad}")));
            }
        }
        let f: fn(f64) -> f64 = match op {
            Unary::Neg => |v| -v,
            Unary::Sigmoid => tensor::sigmoid,
            Unary::Tanh => f64::tanh,
            Unary::Relu => |v| if v > 0.0 { v } else { 0.0 },
            Unary::Exp => f64::exp,
            Unary::Log => f64::ln,
        };
        let out = xv.data().iter().map(|&v| f(v)).collect();
        let shape = xv.shape().to_vec();
        Ok(self.push(Tensor::from_parts(shape, out), Op::Unary(op, x)))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(Unary::Sigmoid, x).expect("sigmoid is total")
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(Unary::Tanh, x).expect("tanh is total")
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(Unary::Relu, x).expect("relu is total")
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(Unary::Exp, x).expect("exp is total")
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.unary(Unary::Neg, x).expect("neg is total")
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Log, x)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let xv = self.value(x);
        let out = xv.data().iter().map(|v| v * factor).collect();
        let shape = xv.shape().to_vec();
        self.push(Tensor::from_parts(shape, out), Op::Scale(x, factor))
    }

    /// Softmax of each row independently, with max subtraction.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let (r, _) = xv.dims2();
        let mut out = Vec::with_capacity(xv.len());
        for i in 0..r {
            out.extend(tensor::softmax(xv.row(i)));
        }
        let shape = xv.shape().to_vec();
        self.push(Tensor::from_parts(shape, out), Op::SoftmaxRows(x))
    }

    /// Concatenation. Axis 0 stacks rows (or joins vectors end to end when
    /// every part is a vector); axis 1 joins columns of equal-height parts.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Precondition("concat of an empty list".into()));
        }
        let values: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let (shape, data) = match axis {
            0 if values.iter().all(|v| v.shape().len() <= 1) => {
                let data: Vec<f64> = values.iter().flat_map(|v| v.data().iter().copied()).collect();
                (vec![data.len()], data)
            }
            0 => {
                let cols = values[0].cols();
                if let Some(bad) = values.iter().find(|v| v.cols() != cols) {
                    return Err(Error::Shape(format!(
                        "concat on axis 0: column count {cols} vs shape {:?}",
                        bad.shape()
                    )));
                }
                let data: Vec<f64> = values.iter().flat_map(|v| v.data().iter().copied()).collect();
                (vec![data.len() / cols, cols], data)
            }
            1 => {
                let rows = values[0].rows();
                if let Some(bad) = values.iter().find(|v| v.rows() != rows) {
                    return Err(Error::Shape(format!(
                        "concat on axis 1: row count {rows} vs shape {:?}",
                        bad.shape()
                    )));
                }
                let total: usize = values.iter().map(|v| v.cols()).sum();
                let mut data = Vec::with_capacity(rows * total);
                for i in 0..rows {
                    for v in &values {
                        data.extend_from_slice(v.row(i));
                    }
                }
                let shape = if values.iter().all(|v| v.shape().len() == 1) {
                    vec![total]
                } else {
                    vec![rows, total]
                };
                (shape, data)
            }
            _ => return Err(Error::Shape(format!("concat axis {axis} unsupported"))),
        };
        Ok(self.push(Tensor::from_parts(shape, data), Op::Concat { parts: parts.to_vec(), axis }))
    }

    /// Rows `start..start+len` of a matrix.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        let (r, c) = xv.dims2();
        if len == 0 || start + len > r {
            return Err(Error::Shape(format!("rows {start}..{} of {:?}", start + len, xv.shape())));
        }
        let data = xv.data()[start * c..(start + len) * c].to_vec();
        Ok(self.push(Tensor::from_parts(vec![len, c], data), Op::SliceRows { x, start }))
    }

    pub fn row(&mut self, x: Var, i: usize) -> Result<Var> {
        self.slice_rows(x, i, 1)
    }

    /// Columns `start..start+len` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        let (r, c) = xv.dims2();
        if len == 0 || start + len > c {
            return Err(Error::Shape(format!("cols {start}..{} of {:?}", start + len, xv.shape())));
        }
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&xv.row(i)[start..start + len]);
        }
        Ok(self.push(Tensor::from_parts(vec![r, len], data), Op::SliceCols { x, start }))
    }

    /// Column-wise maximum over the rows of `x`, giving a `1 x d` row. The
    /// subgradient of each coordinate goes to the earliest maximizing row.
    pub fn max_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let (r, c) = xv.dims2();
        let mut argmax = vec![0usize; c];
        let mut best = xv.row(0).to_vec();
        for i in 1..r {
            for (j, &v) in xv.row(i).iter().enumerate() {
                if v > best[j] {
                    best[j] = v;
                    argmax[j] = i;
                }
            }
        }
        self.push(Tensor::from_parts(vec![1, c], best), Op::MaxRows { x, argmax })
    }

    /// All ordered pairs: row `i*n + j` of the result is `a[i] + b[j]`.
    pub fn pairwise_add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (n, d) = av.dims2();
        if bv.dims2() != (n, d) {
            return Err(Error::Shape(format!(
                "pairwise_add of {:?} and {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let mut data = Vec::with_capacity(n * n * d);
        for i in 0..n {
            for j in 0..n {
                data.extend(av.row(i).iter().zip(bv.row(j)).map(|(x, y)| x + y));
            }
        }
        Ok(self.push(Tensor::from_parts(vec![n * n, d], data), Op::PairwiseAdd(a, b)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// `-log softmax(logits)[target]` for a single row of logits.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let lv = self.value(logits);
        if lv.rows() != 1 || target >= lv.cols() {
            return Err(Error::Shape(format!(
                "cross_entropy target {target} for logits {:?}",
                lv.shape()
            )));
        }
        let loss = tensor::log_sum_exp(lv.data()) - lv.data()[target];
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, target }))
    }

    /// Summed binary cross-entropy of `sigmoid(logits)` against 0/1 targets,
    /// evaluated in the overflow-free form `max(z,0) - a z + ln(1 + e^-|z|)`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64]) -> Result<Var> {
        let lv = self.value(logits);
        if lv.len() != targets.len() {
            return Err(Error::Shape(format!(
                "bce logits {:?} vs {} targets",
                lv.shape(),
                targets.len()
            )));
        }
        let loss = lv
            .data()
            .iter()
            .zip(targets)
            .map(|(&z, &a)| z.max(0.0) - a * z + (-z.abs()).exp().ln_1p())
            .sum();
        Ok(self.push(
            Tensor::scalar(loss),
            Op::BceWithLogits { logits, targets: targets.to_vec() },
        ))
    }

    /// Branch pattern of every non-smooth primitive on this tape: relu input
    /// signs (with a dead band of [`KINK_BAND`]) and max-over-rows winners.
    /// Two evaluations with equal signatures lie on the same smooth piece.
    pub fn kink_signature(&self) -> Vec<i64> {
        let mut sig = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Unary(Unary::Relu, x) => {
                    sig.extend(self.value(*x).data().iter().map(|&v| {
                        if v > KINK_BAND {
                            1
                        } else if v < -KINK_BAND {
                            -1
                        } else {
                            0
                        }
                    }));
                }
                Op::MaxRows { argmax, .. } => sig.extend(argmax.iter().map(|&a| a as i64)),
                _ => {}
            }
        }
        sig
    }

    /// Reverse sweep from a scalar `loss`; returns parameter gradients.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        let mut grads = Gradients::new();
        self.backward_into(loss, 1.0, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Tape::backward`] but adds `scale * dloss/dparam` into `grads`.
    pub fn backward_into(&mut self, loss: Var, scale: f64, grads: &mut Gradients) -> Result<()> {
        if self.consumed {
            return Err(Error::Precondition("backward already ran on this tape".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Precondition(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.consumed = true;

        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![scale]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param { id } => grads.add_dense(*id, node.value.len(), &g, 1.0),
                Op::Gather { id, table_len, rows } => {
                    let d = node.value.cols();
                    for (k, &r) in rows.iter().enumerate() {
                        grads.add_row(*id, *table_len, d, r, &g[k * d..(k + 1) * d], 1.0);
                    }
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (m, k) = av.dims2();
                    let n = bv.cols();
                    let mut ga = vec![0.0; m * k];
                    tensor::matmul_nt_acc(&g, bv.data(), m, n, k, &mut ga);
                    let mut gb = vec![0.0; k * n];
                    tensor::matmul_tn_acc(av.data(), &g, m, k, n, &mut gb);
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Transpose(x) => {
                    let (r, c) = self.value(*x).dims2();
                    let mut gx = vec![0.0; r * c];
                    for i in 0..r {
                        for j in 0..c {
                            gx[i * c + j] = g[j * r + i];
                        }
                    }
                    accumulate(&mut adj, *x, gx);
                }
                Op::Binary(op, a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let plan = Broadcast::plan(av, bv).expect("validated in forward");
                    let mut ga = vec![0.0; av.len()];
                    let mut gb = vec![0.0; bv.len()];
                    for i in 0..plan.rows {
                        for j in 0..plan.cols {
                            let go = g[i * plan.cols + j];
                            let (ia, ib) = (plan.a_index(i, j), plan.b_index(i, j));
                            match op {
                                Binary::Add => {
                                    ga[ia] += go;
                                    gb[ib] += go;
                                }
                                Binary::Sub => {
                                    ga[ia] += go;
                                    gb[ib] -= go;
                                }
                                Binary::Mul => {
                                    ga[ia] += go * bv.data()[ib];
                                    gb[ib] += go * av.data()[ia];
                                }
                            }
                        }
                    }
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Unary(op, x) => {
                    let xv = self.value(*x).data();
                    let yv = node.value.data();
                    let gx = g
                        .iter()
                        .zip(xv.iter().zip(yv))
                        .map(|(&go, (&xi, &yi))| {
                            go * match op {
                                Unary::Neg => -1.0,
                                Unary::Sigmoid => yi * (1.0 - yi),
                                Unary::Tanh => 1.0 - yi * yi,
                                Unary::Relu => {
                                    if xi > 0.0 {
                                        1.0
                                    } else {
                                        0.0
                                    }
                                }
                                Unary::Exp => yi,
                                Unary::Log => 1.0 / xi,
                            }
                        })
                        .collect();
                    accumulate(&mut adj, *x, gx);
                }
                Op::Scale(x, f) => {
                    let gx = g.iter().map(|v| v * f).collect();
                    accumulate(&mut adj, *x, gx);
                }
                Op::SoftmaxRows(x) => {
                    let y = &node.value;
                    let (r, c) = y.dims2();
                    let mut gx = vec![0.0; r * c];
                    for i in 0..r {
                        let yr = y.row(i);
                        let gr = &g[i * c..(i + 1) * c];
                        let inner = tensor::dot(yr, gr);
                        for j in 0..c {
                            gx[i * c + j] = yr[j] * (gr[j] - inner);
                        }
                    }
                    accumulate(&mut adj, *x, gx);
                }
                Op::Concat { parts, axis } => {
                    let out_cols = node.value.cols();
                    let vector_join = node.value.shape().len() == 1 && *axis == 0;
                    if *axis == 0 || vector_join {
                        let mut offset = 0;
                        for &p in parts {
                            let len = self.value(p).len();
                            accumulate(&mut adj, p, g[offset..offset + len].to_vec());
                            offset += len;
                        }
                    } else {
                        let rows = node.value.rows();
                        let mut col = 0;
                        for &p in parts {
                            let pc = self.value(p).cols();
                            let mut gp = Vec::with_capacity(rows * pc);
                            for i in 0..rows {
                                gp.extend_from_slice(&g[i * out_cols + col..i * out_cols + col + pc]);
                            }
                            accumulate(&mut adj, p, gp);
                            col += pc;
                        }
                    }
                }
                Op::SliceRows { x, start } => {
                    let xv = self.value(*x);
                    let c = xv.cols();
                    let mut gx = vec![0.0; xv.len()];
                    gx[start * c..start * c + g.len()].copy_from_slice(&g);
                    accumulate(&mut adj, *x, gx);
                }
                Op::SliceCols { x, start } => {
                    let xv = self.value(*x);
                    let (r, c) = xv.dims2();
                    let len = node.value.cols();
                    let mut gx = vec![0.0; r * c];
                    for i in 0..r {
                        gx[i * c + start..i * c + start + len].copy_from_slice(&g[i * len..(i + 1) * len]);
                    }
                    accumulate(&mut adj, *x, gx);
                }
                Op::MaxRows { x, argmax } => {
                    let xv = self.value(*x);
                    let c = xv.cols();
                    let mut gx = vec![0.0; xv.len()];
                    for (j, &i) in argmax.iter().enumerate() {
                        gx[i * c + j] = g[j];
                    }
                    accumulate(&mut adj, *x, gx);
                }
                Op::PairwiseAdd(a, b) => {
                    let (n, d) = self.value(*a).dims2();
                    let mut ga = vec![0.0; n * d];
                    let mut gb = vec![0.0; n * d];
                    for i in 0..n {
                        for j in 0..n {
                            let gr = &g[(i * n + j) * d..(i * n + j + 1) * d];
                            for k in 0..d {
                                ga[i * d + k] += gr[k];
                                gb[j * d + k] += gr[k];
                            }
                        }
                    }
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Sum(x) => {
                    let len = self.value(*x).len();
                    accumulate(&mut adj, *x, vec![g[0]; len]);
                }
                Op::CrossEntropy { logits, target } => {
                    let mut gx = tensor::softmax(self.value(*logits).data());
                    gx[*target] -= 1.0;
                    gx.iter_mut().for_each(|v| *v *= g[0]);
                    accumulate(&mut adj, *logits, gx);
                }
                Op::BceWithLogits { logits, targets } => {
                    let gx = self
                        .value(*logits)
                        .data()
                        .iter()
                        .zip(targets)
                        .map(|(&z, &a)| g[0] * (tensor::sigmoid(z) - a))
                        .collect();
                    accumulate(&mut adj, *logits, gx);
                }
            }
        }
        Ok(())
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
    match &mut adj[v.0] {
        Some(existing) => {
            for (e, x) in existing.iter_mut().zip(g) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

/// Index mapping for a broadcast binary op over `rows x cols` views.
struct Broadcast {
    rows: usize,
    cols: usize,
    a_dims: (usize, usize),
    b_dims: (usize, usize),
    out_shape: Vec<usize>,
}

impl Broadcast {
    fn plan(a: &Tensor, b: &Tensor) -> Result<Self> {
        let (ad, bd) = (a.dims2(), b.dims2());
        let pick = |x: usize, y: usize| -> Option<usize> {
            if x == y || y == 1 {
                Some(x)
            } else if x == 1 {
                Some(y)
            } else {
                None
            }
        };
        let (Some(rows), Some(cols)) = (pick(ad.0, bd.0), pick(ad.1, bd.1)) else {
            return Err(Error::Shape(format!(
                "cannot broadcast {:?} with {:?}",
                a.shape(),
                b.shape()
            )));
        };
        let out_shape = if a.shape() == b.shape() {
            a.shape().to_vec()
        } else if b.len() == 1 {
            a.shape().to_vec()
        } else if a.len() == 1 {
            b.shape().to_vec()
        } else if rows == 1 && a.shape().len() <= 1 && b.shape().len() <= 1 {
            vec![cols]
        } else {
            vec![rows, cols]
        };
        Ok(Self { rows, cols, a_dims: ad, b_dims: bd, out_shape })
    }

    fn a_index(&self, i: usize, j: usize) -> usize {
        index(self.a_dims, i, j)
    }

    fn b_index(&self, i: usize, j: usize) -> usize {
        index(self.b_dims, i, j)
    }
}

fn index((r, c): (usize, usize), i: usize, j: usize) -> usize {
    let i = if r == 1 { 0 } else { i };
    let j = if c == 1 { 0 } else { j };
    i * c + j
}
