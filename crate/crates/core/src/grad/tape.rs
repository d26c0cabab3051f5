//! Reverse-mode differentiation over a linear tape.
//!
//! Nodes are appended in evaluation order, so every node's inputs precede it
//! and a single reverse sweep visits nodes in topological order. Parameter
//! values are stored as `f32`; every intermediate held by the tape is `f64`.

use super::param::{ParamId, ParamStore};
use super::{GradError, Tensor};

/// Index of a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

/// Kernels the tape can evaluate and differentiate.
#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    /// Constant leaf.
    Input,
    /// Leaf bound to a trainable parameter.
    Param(ParamId),
    MatMul,
    Add,
    /// `a + b` where `b` is a single row (`1×c`) or a single column (`r×1`).
    AddBroadcast,
    Mul,
    /// Tensor times a `1×1` node.
    MulScalar,
    Concat(Axis),
    Tanh,
    Sigmoid,
    /// Row-wise softmax with max subtraction.
    Softmax,
    Log,
    /// `-ln(x[index] + 1e-12)` of a single-row input.
    NegLogPick { index: usize },
    ReduceSum,
    ReduceMean,
    ElemMin,
    Scale(f64),
    /// Row lookup (embedding).
    Gather { rows: Vec<usize> },
    /// Single row of length `indices.len()` scattered (with summation) into a
    /// row of length `size`.
    ScatterAdd { indices: Vec<usize>, size: usize },
    /// Right zero-padding of every row to `cols` columns.
    PadCols { cols: usize },
    Reshape { rows: usize, cols: usize },
    Transpose,
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Input => "input",
            Kernel::Param(_) => "param",
            Kernel::MatMul => "matmul",
            Kernel::Add => "add",
            Kernel::AddBroadcast => "add-broadcast",
            Kernel::Mul => "mul",
            Kernel::MulScalar => "mul-scalar",
            Kernel::Concat(_) => "concat",
            Kernel::Tanh => "tanh",
            Kernel::Sigmoid => "sigmoid",
            Kernel::Softmax => "softmax",
            Kernel::Log => "log",
            Kernel::NegLogPick { .. } => "neg-log-pick",
            Kernel::ReduceSum => "reduce-sum",
            Kernel::ReduceMean => "reduce-mean",
            Kernel::ElemMin => "elementwise-min",
            Kernel::Scale(_) => "scale",
            Kernel::Gather { .. } => "gather",
            Kernel::ScatterAdd { .. } => "scatter-add",
            Kernel::PadCols { .. } => "pad-cols",
            Kernel::Reshape { .. } => "reshape",
            Kernel::Transpose => "transpose",
        }
    }
}

/// Guard added inside the logarithm of [`Kernel::NegLogPick`].
pub const PICK_EPS: f64 = 1e-12;

/// Dense `f64` matrix held by the tape.
#[derive(Clone, Debug, PartialEq)]
pub struct Buf {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Buf {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Buf { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        let (rows, cols) = t.matrix_dims();
        Buf { rows, cols, data: t.data().iter().map(|&v| v as f64).collect() }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.rows, self.cols], self.data.iter().map(|&v| v as f32).collect())
            .expect("tape buffers are never empty")
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn scalar(&self) -> f64 {
        self.data[0]
    }

    fn add_assign(&mut self, other: &[f64]) {
        for (a, b) in self.data.iter_mut().zip(other) {
            *a += b;
        }
    }
}

struct Node {
    kernel: Kernel,
    inputs: Vec<NodeId>,
    value: Buf,
}

/// Per-parameter gradients produced by one backward sweep, indexed by
/// [`ParamId`]. Parameters the loss does not reach have no entry.
#[derive(Clone, Debug, Default)]
pub struct ParamGrads {
    grads: Vec<Option<Buf>>,
}

impl ParamGrads {
    pub fn get(&self, id: ParamId) -> Option<&Buf> {
        self.grads.get(id.index()).and_then(|g| g.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Buf)> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (ParamId::from_index(i), g)))
    }
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
    grads: Vec<Option<Buf>>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape { params, nodes: Vec::new(), param_nodes: vec![None; params.len()], grads: Vec::new() }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Buf {
        &self.nodes[id.0].value
    }

    pub fn tensor(&self, id: NodeId) -> Tensor {
        self.nodes[id.0].value.to_tensor()
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.scalar()
    }

    pub fn kernel(&self, id: NodeId) -> &Kernel {
        &self.nodes[id.0].kernel
    }

    /// Gradient of the last backward loss with respect to `id`.
    pub fn grad(&self, id: NodeId) -> Option<&Buf> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    fn push(&mut self, kernel: Kernel, inputs: Vec<NodeId>, value: Buf) -> NodeId {
        self.nodes.push(Node { kernel, inputs, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, t: &Tensor) -> NodeId {
        self.push(Kernel::Input, Vec::new(), Buf::from_tensor(t))
    }

    pub fn input_buf(&mut self, b: Buf) -> NodeId {
        self.push(Kernel::Input, Vec::new(), b)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, v: f64) -> NodeId {
        self.push(Kernel::Input, Vec::new(), Buf { rows, cols, data: vec![v; rows * cols] })
    }

    /// Leaf for a parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.param_nodes[id.index()] {
            return n;
        }
        let value = Buf::from_tensor(&self.params.get(id).value);
        let n = self.push(Kernel::Param(id), Vec::new(), value);
        self.param_nodes[id.index()] = Some(n);
        n
    }

    /// Appends one node computing `kernel` over `inputs`.
    pub fn eval(&mut self, kernel: Kernel, inputs: &[NodeId]) -> Result<NodeId, GradError> {
        let value = forward(&kernel, &inputs.iter().map(|&i| &self.nodes[i.0].value).collect::<Vec<_>>())?;
        Ok(self.push(kernel, inputs.to_vec(), value))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        self.eval(Kernel::MatMul, &[a, b])
    }
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        self.eval(Kernel::Add, &[a, b])
    }
    pub fn add_broadcast(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        self.eval(Kernel::AddBroadcast, &[a, b])
    }
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        self.eval(Kernel::Mul, &[a, b])
    }
    pub fn mul_scalar(&mut self, a: NodeId, s: NodeId) -> Result<NodeId, GradError> {
        self.eval(Kernel::MulScalar, &[a, s])
    }
    pub fn concat(&mut self, axis: Axis, parts: &[NodeId]) -> Result<NodeId, GradError> {
        self.eval(Kernel::Concat(axis), parts)
    }
    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        self.eval(Kernel::Tanh, &[a])
    }
    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        self.eval(Kernel::Sigmoid, &[a])
    }
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        self.eval(Kernel::Softmax, &[a])
    }
    pub fn log(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        self.eval(Kernel::Log, &[a])
    }
    pub fn neg_log_pick(&mut self, a: NodeId, index: usize) -> Result<NodeId, GradError> {
        self.eval(Kernel::NegLogPick { index }, &[a])
    }
    pub fn reduce_sum(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        self.eval(Kernel::ReduceSum, &[a])
    }
    pub fn reduce_mean(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        self.eval(Kernel::ReduceMean, &[a])
    }
    pub fn elem_min(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        self.eval(Kernel::ElemMin, &[a, b])
    }
    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId, GradError> {
        self.eval(Kernel::Scale(factor), &[a])
    }
    pub fn gather(&mut self, table: NodeId, rows: &[usize]) -> Result<NodeId, GradError> {
        self.eval(Kernel::Gather { rows: rows.to_vec() }, &[table])
    }
    pub fn scatter_add(&mut self, a: NodeId, indices: &[usize], size: usize) -> Result<NodeId, GradError> {
        self.eval(Kernel::ScatterAdd { indices: indices.to_vec(), size }, &[a])
    }
    pub fn pad_cols(&mut self, a: NodeId, cols: usize) -> Result<NodeId, GradError> {
        self.eval(Kernel::PadCols { cols }, &[a])
    }
    pub fn reshape(&mut self, a: NodeId, rows: usize, cols: usize) -> Result<NodeId, GradError> {
        self.eval(Kernel::Reshape { rows, cols }, &[a])
    }
    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId, GradError> {
        self.eval(Kernel::Transpose, &[a])
    }

    /// Fills node gradients of `loss` and returns the parameter gradients.
    pub fn backward(&mut self, loss: NodeId) -> Result<ParamGrads, GradError> {
        let (r, c) = self.nodes[loss.0].value.dims();
        if r * c != 1 {
            return Err(GradError::NonScalarLoss { dims: vec![r, c] });
        }
        let mut grads: Vec<Option<Buf>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Buf { rows: 1, cols: 1, data: vec![1.0] });
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.inputs.is_empty() {
                let ins: Vec<&Buf> = node.inputs.iter().map(|i| &self.nodes[i.0].value).collect();
                let in_grads = backward_kernel(&node.kernel, &ins, &node.value, &g);
                for (input, ig) in node.inputs.iter().zip(in_grads) {
                    let Some(ig) = ig else { continue };
                    match &mut grads[input.0] {
                        Some(acc) => acc.add_assign(&ig.data),
                        slot @ None => *slot = Some(ig),
                    }
                }
            }
            grads[idx] = Some(g);
        }
        let mut param_grads = vec![None; self.params.len()];
        for (pid, node) in self.param_nodes.iter().enumerate() {
            if let Some(n) = node {
                param_grads[pid] = grads[n.0].clone();
            }
        }
        grads.resize(self.nodes.len(), None);
        self.grads = grads;
        Ok(ParamGrads { grads: param_grads })
    }
}

fn mismatch(kernel: &Kernel, ins: &[&Buf]) -> GradError {
    GradError::DimMismatch {
        kernel: kernel.name(),
        dims: ins.iter().map(|b| (b.rows, b.cols)).collect(),
    }
}

fn arity(kernel: &Kernel) -> Option<usize> {
    match kernel {
        Kernel::Input | Kernel::Param(_) => Some(0),
        Kernel::MatMul | Kernel::Add | Kernel::AddBroadcast | Kernel::Mul | Kernel::MulScalar | Kernel::ElemMin => {
            Some(2)
        }
        Kernel::Concat(_) => None,
        _ => Some(1),
    }
}

/// Dot product with four independent accumulators.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out += scale * x`
fn axpy(out: &mut [f64], scale: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += scale * v;
    }
}

/// `out += a·b` for row-major `a` (m×k) and `b` (k×n).
pub(crate) fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    if n == 1 {
        for (o, row) in out.iter_mut().zip(a.chunks_exact(k)) {
            *o += dot(row, b);
        }
        return;
    }
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av != 0.0 {
                axpy(row, av, &b[p * n..(p + 1) * n]);
            }
        }
    }
}

fn map(a: &Buf, f: impl Fn(f64) -> f64) -> Buf {
    Buf { rows: a.rows, cols: a.cols, data: a.data.iter().map(|&v| f(v)).collect() }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn forward(kernel: &Kernel, ins: &[&Buf]) -> Result<Buf, GradError> {
    match arity(kernel) {
        Some(n) if n != ins.len() => return Err(mismatch(kernel, ins)),
        None if ins.is_empty() => return Err(mismatch(kernel, ins)),
        _ => {}
    }
    let out = match kernel {
        Kernel::Input | Kernel::Param(_) => return Err(mismatch(kernel, ins)),
        Kernel::MatMul => {
            let (a, b) = (ins[0], ins[1]);
            if a.cols != b.rows {
                return Err(mismatch(kernel, ins));
            }
            let mut out = Buf::zeros(a.rows, b.cols);
            matmul_into(&a.data, &b.data, &mut out.data, a.rows, a.cols, b.cols);
            out
        }
        Kernel::Add | Kernel::Mul | Kernel::ElemMin => {
            let (a, b) = (ins[0], ins[1]);
            if a.dims() != b.dims() {
                return Err(mismatch(kernel, ins));
            }
            let f: fn(f64, f64) -> f64 = match kernel {
                Kernel::Add => |x, y| x + y,
                Kernel::Mul => |x, y| x * y,
                _ => f64::min,
            };
            Buf { rows: a.rows, cols: a.cols, data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect() }
        }
        Kernel::AddBroadcast => {
            let (a, b) = (ins[0], ins[1]);
            let mut out = a.clone();
            if b.rows == 1 && b.cols == a.cols {
                for row in out.data.chunks_mut(a.cols) {
                    for (o, v) in row.iter_mut().zip(&b.data) {
                        *o += v;
                    }
                }
            } else if b.cols == 1 && b.rows == a.rows {
                for (row, v) in out.data.chunks_mut(a.cols).zip(&b.data) {
                    row.iter_mut().for_each(|o| *o += v);
                }
            } else {
                return Err(mismatch(kernel, ins));
            }
            out
        }
        Kernel::MulScalar => {
            if ins[1].data.len() != 1 {
                return Err(mismatch(kernel, ins));
            }
            let s = ins[1].data[0];
            map(ins[0], |v| v * s)
        }
        Kernel::Concat(axis) => concat(*axis, ins).ok_or_else(|| mismatch(kernel, ins))?,
        Kernel::Tanh => map(ins[0], f64::tanh),
        Kernel::Sigmoid => map(ins[0], sigmoid),
        Kernel::Softmax => {
            let a = ins[0];
            let mut out = a.clone();
            for row in out.data.chunks_mut(a.cols) {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                row.iter_mut().for_each(|v| *v /= sum);
            }
            out
        }
        Kernel::Log => map(ins[0], f64::ln),
        Kernel::NegLogPick { index } => {
            let a = ins[0];
            if a.rows != 1 || *index >= a.cols {
                return Err(GradError::IndexOutOfRange { kernel: kernel.name(), index: *index, len: a.cols });
            }
            Buf { rows: 1, cols: 1, data: vec![-(a.data[*index] + PICK_EPS).ln()] }
        }
        Kernel::ReduceSum => Buf { rows: 1, cols: 1, data: vec![ins[0].data.iter().sum()] },
        Kernel::ReduceMean => {
            let a = ins[0];
            Buf { rows: 1, cols: 1, data: vec![a.data.iter().sum::<f64>() / a.data.len() as f64] }
        }
        Kernel::Scale(f) => map(ins[0], |v| v * f),
        Kernel::Gather { rows } => {
            let a = ins[0];
            let mut out = Buf::zeros(rows.len(), a.cols);
            for (k, &r) in rows.iter().enumerate() {
                if r >= a.rows {
                    return Err(GradError::IndexOutOfRange { kernel: kernel.name(), index: r, len: a.rows });
                }
                out.data[k * a.cols..(k + 1) * a.cols].copy_from_slice(&a.data[r * a.cols..(r + 1) * a.cols]);
            }
            out
        }
        Kernel::ScatterAdd { indices, size } => {
            let a = ins[0];
            if a.rows != 1 || a.cols != indices.len() {
                return Err(mismatch(kernel, ins));
            }
            let mut out = Buf::zeros(1, *size);
            for (&i, &v) in indices.iter().zip(&a.data) {
                if i >= *size {
                    return Err(GradError::IndexOutOfRange { kernel: kernel.name(), index: i, len: *size });
                }
                out.data[i] += v;
            }
            out
        }
        Kernel::PadCols { cols } => {
            let a = ins[0];
            if *cols < a.cols {
                return Err(mismatch(kernel, ins));
            }
            let mut out = Buf::zeros(a.rows, *cols);
            for r in 0..a.rows {
                out.data[r * cols..r * cols + a.cols].copy_from_slice(&a.data[r * a.cols..(r + 1) * a.cols]);
            }
            out
        }
        Kernel::Reshape { rows, cols } => {
            let a = ins[0];
            if rows * cols != a.data.len() {
                return Err(mismatch(kernel, ins));
            }
            Buf { rows: *rows, cols: *cols, data: a.data.clone() }
        }
        Kernel::Transpose => transpose(ins[0]),
    };
    Ok(out)
}

fn transpose(a: &Buf) -> Buf {
    let mut out = Buf::zeros(a.cols, a.rows);
    for r in 0..a.rows {
        for c in 0..a.cols {
            out.data[c * a.rows + r] = a.data[r * a.cols + c];
        }
    }
    out
}

fn concat(axis: Axis, ins: &[&Buf]) -> Option<Buf> {
    match axis {
        Axis::Rows => {
            let cols = ins[0].cols;
            if ins.iter().any(|b| b.cols != cols) {
                return None;
            }
            let rows = ins.iter().map(|b| b.rows).sum();
            let mut data = Vec::with_capacity(rows * cols);
            for b in ins {
                data.extend_from_slice(&b.data);
            }
            Some(Buf { rows, cols, data })
        }
        Axis::Cols => {
            let rows = ins[0].rows;
            if ins.iter().any(|b| b.rows != rows) {
                return None;
            }
            let cols: usize = ins.iter().map(|b| b.cols).sum();
            let mut data = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for b in ins {
                    data.extend_from_slice(&b.data[r * b.cols..(r + 1) * b.cols]);
                }
            }
            Some(Buf { rows, cols, data })
        }
    }
}

/// Vector-Jacobian products of one kernel. `None` marks an input that
/// receives no gradient contribution.
fn backward_kernel(kernel: &Kernel, ins: &[&Buf], out: &Buf, g: &Buf) -> Vec<Option<Buf>> {
    let like = |b: &Buf, data: Vec<f64>| Buf { rows: b.rows, cols: b.cols, data };
    match kernel {
        Kernel::Input | Kernel::Param(_) => Vec::new(),
        Kernel::MatMul => {
            let (a, b) = (ins[0], ins[1]);
            let (m, k, n) = (a.rows, a.cols, b.cols);
            // dA = G·Bᵀ
            let mut da = Buf::zeros(m, k);
            for (i, row) in da.data.chunks_exact_mut(k).enumerate() {
                let grow = &g.data[i * n..(i + 1) * n];
                if n == 1 {
                    axpy(row, grow[0], &b.data);
                } else {
                    for (p, o) in row.iter_mut().enumerate() {
                        *o = dot(grow, &b.data[p * n..(p + 1) * n]);
                    }
                }
            }
            // dB = Aᵀ·G
            let mut db = Buf::zeros(k, n);
            for i in 0..m {
                let grow = &g.data[i * n..(i + 1) * n];
                let arow = &a.data[i * k..(i + 1) * k];
                if n == 1 {
                    axpy(&mut db.data, grow[0], arow);
                } else {
                    for (p, &av) in arow.iter().enumerate() {
                        if av != 0.0 {
                            axpy(&mut db.data[p * n..(p + 1) * n], av, grow);
                        }
                    }
                }
            }
            vec![Some(da), Some(db)]
        }
        Kernel::Add => vec![Some(g.clone()), Some(g.clone())],
        Kernel::AddBroadcast => {
            let (a, b) = (ins[0], ins[1]);
            let mut db = Buf::zeros(b.rows, b.cols);
            if b.rows == 1 && b.cols == a.cols {
                for row in g.data.chunks(a.cols) {
                    for (o, v) in db.data.iter_mut().zip(row) {
                        *o += v;
                    }
                }
            } else {
                for (o, row) in db.data.iter_mut().zip(g.data.chunks(a.cols)) {
                    *o = row.iter().sum();
                }
            }
            vec![Some(g.clone()), Some(db)]
        }
        Kernel::Mul => {
            let (a, b) = (ins[0], ins[1]);
            let da = g.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
            let db = g.data.iter().zip(&a.data).map(|(x, y)| x * y).collect();
            vec![Some(like(a, da)), Some(like(b, db))]
        }
        Kernel::MulScalar => {
            let (a, s) = (ins[0], ins[1]);
            let sv = s.data[0];
            let da = g.data.iter().map(|x| x * sv).collect();
            let ds = g.data.iter().zip(&a.data).map(|(x, y)| x * y).sum();
            vec![Some(like(a, da)), Some(like(s, vec![ds]))]
        }
        Kernel::Concat(axis) => {
            let mut res = Vec::with_capacity(ins.len());
            match axis {
                Axis::Rows => {
                    let mut off = 0;
                    for b in ins {
                        let n = b.data.len();
                        res.push(Some(like(b, g.data[off..off + n].to_vec())));
                        off += n;
                    }
                }
                Axis::Cols => {
                    let total = out.cols;
                    let mut col_off = 0;
                    for b in ins {
                        let mut d = Vec::with_capacity(b.data.len());
                        for r in 0..b.rows {
                            let start = r * total + col_off;
                            d.extend_from_slice(&g.data[start..start + b.cols]);
                        }
                        res.push(Some(like(b, d)));
                        col_off += b.cols;
                    }
                }
            }
            res
        }
        Kernel::Tanh => {
            let d = g.data.iter().zip(&out.data).map(|(x, y)| x * (1.0 - y * y)).collect();
            vec![Some(like(ins[0], d))]
        }
        Kernel::Sigmoid => {
            let d = g.data.iter().zip(&out.data).map(|(x, y)| x * y * (1.0 - y)).collect();
            vec![Some(like(ins[0], d))]
        }
        Kernel::Softmax => {
            let cols = out.cols;
            let mut d = Vec::with_capacity(out.data.len());
            for (grow, yrow) in g.data.chunks(cols).zip(out.data.chunks(cols)) {
                let dot: f64 = grow.iter().zip(yrow).map(|(x, y)| x * y).sum();
                d.extend(grow.iter().zip(yrow).map(|(x, y)| y * (x - dot)));
            }
            vec![Some(like(ins[0], d))]
        }
        Kernel::Log => {
            let d = g.data.iter().zip(&ins[0].data).map(|(x, y)| x / y).collect();
            vec![Some(like(ins[0], d))]
        }
        Kernel::NegLogPick { index } => {
            let a = ins[0];
            let mut d = Buf::zeros(a.rows, a.cols);
            d.data[*index] = -g.data[0] / (a.data[*index] + PICK_EPS);
            vec![Some(d)]
        }
        Kernel::ReduceSum => vec![Some(like(ins[0], vec![g.data[0]; ins[0].data.len()]))],
        Kernel::ReduceMean => {
            let n = ins[0].data.len();
            vec![Some(like(ins[0], vec![g.data[0] / n as f64; n]))]
        }
        Kernel::ElemMin => {
            let (a, b) = (ins[0], ins[1]);
            let mut da = Vec::with_capacity(a.data.len());
            let mut db = Vec::with_capacity(a.data.len());
            for ((x, y), gv) in a.data.iter().zip(&b.data).zip(&g.data) {
                if x <= y {
                    da.push(*gv);
                    db.push(0.0);
                } else {
                    da.push(0.0);
                    db.push(*gv);
                }
            }
            vec![Some(like(a, da)), Some(like(b, db))]
        }
        Kernel::Scale(f) => vec![Some(like(ins[0], g.data.iter().map(|x| x * f).collect()))],
        Kernel::Gather { rows } => {
            let a = ins[0];
            let mut d = Buf::zeros(a.rows, a.cols);
            for (k, &r) in rows.iter().enumerate() {
                for (o, v) in d.data[r * a.cols..(r + 1) * a.cols].iter_mut().zip(&g.data[k * a.cols..(k + 1) * a.cols]) {
                    *o += v;
                }
            }
            vec![Some(d)]
        }
        Kernel::ScatterAdd { indices, .. } => {
            vec![Some(like(ins[0], indices.iter().map(|&i| g.data[i]).collect()))]
        }
        Kernel::PadCols { cols } => {
            let a = ins[0];
            let mut d = Vec::with_capacity(a.data.len());
            for r in 0..a.rows {
                d.extend_from_slice(&g.data[r * cols..r * cols + a.cols]);
            }
            vec![Some(like(a, d))]
        }
        Kernel::Reshape { .. } => vec![Some(like(ins[0], g.data.clone()))],
        Kernel::Transpose => vec![Some(transpose(g))],
    }
}
