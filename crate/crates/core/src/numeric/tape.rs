//! Reverse-mode differentiation tape.
//!
//! Every operation appends a node holding its forward value and enough saved
//! state to apply its backward rule. [`Tape::backward`] walks the nodes in
//! reverse insertion order once, which is a valid reverse topological order
//! because inputs always precede their consumers.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::kernels::{self, BatchStats, GeluKind};
use super::Tensor;
use crate::error::{Error, Result};
use crate::math;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Shared row-index list used by gather/segment operations.
pub type Index = Arc<[usize]>;

/// A constant linear map applied along rows: `y = A x`.
pub trait LinearOperator: Send + Sync + fmt::Debug {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &Tensor) -> Tensor;
    fn apply_transpose(&self, x: &Tensor) -> Tensor;
}

#[derive(Clone, Copy, Debug)]
enum Unary {
    LeakyRelu(f64),
    Relu,
    Gelu(GeluKind),
    Sigmoid,
    Exp,
    Recip,
    LnClamped(f64),
}

impl Unary {
    fn forward(self, x: f64) -> f64 {
        match self {
            Unary::LeakyRelu(slope) => kernels::leaky_relu(x, slope),
            Unary::Relu => kernels::relu(x),
            Unary::Gelu(kind) => kernels::gelu(x, kind),
            Unary::Sigmoid => math::sigmoid(x),
            Unary::Exp => math::exp(x),
            Unary::Recip => 1.0 / x,
            Unary::LnClamped(floor) => math::ln(x.max(floor)),
        }
    }

    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::LeakyRelu(slope) => kernels::leaky_relu_grad(x, slope),
            Unary::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Unary::Gelu(kind) => kernels::gelu_grad(x, kind),
            Unary::Sigmoid => y * (1.0 - y),
            Unary::Exp => y,
            Unary::Recip => -y * y,
            Unary::LnClamped(floor) => {
                if x > floor {
                    1.0 / x
                } else {
                    0.0
                }
            }
        }
    }

    fn name(self) -> &'static str {
        match self {
            Unary::LeakyRelu(_) => "leaky_relu",
            Unary::Relu => "relu",
            Unary::Gelu(_) => "gelu",
            Unary::Sigmoid => "sigmoid",
            Unary::Exp => "exp",
            Unary::Recip => "recip",
            Unary::LnClamped(_) => "ln",
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    Scale(Var, Var),
    Affine(Var, f64),
    Unary(Var, Unary),
    SumAll(Var),
    RowSum(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Index),
    SegmentSum(Var, Index),
    SegmentSoftmax(Var, Index, usize),
    SoftmaxRows(Var),
    PickCols(Var, Index),
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        stats: BatchStats,
    },
    Linear(Var, Arc<dyn LinearOperator>),
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddRow(a, b)
            | Op::MulCol(a, b)
            | Op::Scale(a, b) => vec![*a, *b],
            Op::Affine(a, _)
            | Op::Unary(a, _)
            | Op::SumAll(a)
            | Op::RowSum(a)
            | Op::GatherRows(a, _)
            | Op::SegmentSum(a, _)
            | Op::SegmentSoftmax(a, _, _)
            | Op::SoftmaxRows(a)
            | Op::PickCols(a, _)
            | Op::Linear(a, _) => vec![*a],
            Op::ConcatCols(vs) | Op::ConcatRows(vs) => vs.clone(),
            Op::BatchNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recorded computation for one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every leaf that requires them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn like(reference: &Tensor, data: Vec<f64>) -> Tensor {
    Tensor::new(reference.shape().to_vec(), data).expect("gradient shape follows value shape")
}

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

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push("matmul", value, Op::MatMul(a, b))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(op, ta, tb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push("add", value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push("sub", value, Op::Sub(a, b))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push("mul", value, Op::Mul(a, b))
    }

    /// Adds a length-`cols` vector to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (tx, tr) = (self.value(x), self.value(row));
        let cols = tx.cols();
        if tr.len() != cols {
            return Err(shape_err("add_row", tx, tr));
        }
        let mut data = tx.data().to_vec();
        if cols > 0 {
            for chunk in data.chunks_exact_mut(cols) {
                for (v, b) in chunk.iter_mut().zip(tr.data()) {
                    *v += b;
                }
            }
        }
        let value = like(tx, data);
        self.push("add_row", value, Op::AddRow(x, row))
    }

    /// Scales row `i` of `x` by `col[i]`.
    pub fn mul_col(&mut self, x: Var, col: Var) -> Result<Var> {
        let (tx, tc) = (self.value(x), self.value(col));
        let (rows, cols) = tx.dims2();
        if tc.len() != rows {
            return Err(shape_err("mul_col", tx, tc));
        }
        let mut data = tx.data().to_vec();
        for r in 0..rows {
            let s = tc.data()[r];
            for v in &mut data[r * cols..(r + 1) * cols] {
                *v *= s;
            }
        }
        let value = like(tx, data);
        self.push("mul_col", value, Op::MulCol(x, col))
    }

    /// Multiplies `x` by a one-element tensor.
    pub fn scale(&mut self, x: Var, s: Var) -> Result<Var> {
        let (tx, ts) = (self.value(x), self.value(s));
        if ts.len() != 1 {
            return Err(shape_err("scale", tx, ts));
        }
        let k = ts.item();
        let value = tx.map(|v| v * k);
        self.push("scale", value, Op::Scale(x, s))
    }

    /// `a * x + b` with constant `a`, `b`.
    pub fn affine(&mut self, x: Var, a: f64, b: f64) -> Result<Var> {
        let value = self.value(x).map(|v| a * v + b);
        self.push("affine", value, Op::Affine(x, a))
    }

    fn unary(&mut self, x: Var, f: Unary) -> Result<Var> {
        let value = self.value(x).map(|v| f.forward(v));
        self.push(f.name(), value, Op::Unary(x, f))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        self.unary(x, Unary::LeakyRelu(slope))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Unary::Relu)
    }

    pub fn gelu(&mut self, x: Var, kind: GeluKind) -> Result<Var> {
        self.unary(x, Unary::Gelu(kind))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Unary::Sigmoid)
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Unary::Exp)
    }

    pub fn recip(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Unary::Recip)
    }

    /// `ln(max(x, floor))`; the gradient is zero where the floor is active.
    pub fn ln_clamped(&mut self, x: Var, floor: f64) -> Result<Var> {
        self.unary(x, Unary::LnClamped(floor))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(x).sum());
        self.push("sum", value, Op::SumAll(x))
    }

    /// Sum of each row, as an `n x 1` column.
    pub fn row_sum(&mut self, x: Var) -> Result<Var> {
        let tx = self.value(x);
        let (rows, cols) = tx.dims2();
        let data = (0..rows)
            .map(|r| tx.data()[r * cols..(r + 1) * cols].iter().sum())
            .collect();
        let value = Tensor::matrix(rows, 1, data)?;
        self.push("row_sum", value, Op::RowSum(x))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Shape {
            op: "concat_cols",
            left: Vec::new(),
            right: Vec::new(),
        })?;
        let rows = self.value(first).rows();
        let mut total = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(shape_err("concat_cols", self.value(first), t));
            }
            total += t.cols();
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let value = Tensor::matrix(rows, total, data)?;
        self.push("concat_cols", value, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Shape {
            op: "concat_rows",
            left: Vec::new(),
            right: Vec::new(),
        })?;
        let cols = self.value(first).cols();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(shape_err("concat_rows", self.value(first), t));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let value = Tensor::matrix(rows, cols, data)?;
        self.push("concat_rows", value, Op::ConcatRows(parts.to_vec()))
    }

    /// Row `r` of the output is row `index[r]` of `x`.
    pub fn gather_rows(&mut self, x: Var, index: Index) -> Result<Var> {
        let tx = self.value(x);
        let (rows, cols) = tx.dims2();
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index.iter() {
            if i >= rows {
                return Err(crate::error::domain(
                    "gather_rows",
                    alloc::format!("row {i} out of range for {rows} rows"),
                ));
            }
            data.extend_from_slice(tx.row(i));
        }
        let value = Tensor::matrix(index.len(), cols, data)?;
        self.push("gather_rows", value, Op::GatherRows(x, index))
    }

    /// Sums rows of `x` into `segments` buckets; row `r` goes to `segment[r]`.
    pub fn segment_sum(&mut self, x: Var, segment: Index, segments: usize) -> Result<Var> {
        let tx = self.value(x);
        let (rows, cols) = tx.dims2();
        check_segments("segment_sum", rows, &segment, segments)?;
        let mut data = vec![0.0; segments * cols];
        for (r, &s) in segment.iter().enumerate() {
            for (o, v) in data[s * cols..(s + 1) * cols].iter_mut().zip(tx.row(r)) {
                *o += v;
            }
        }
        let value = Tensor::matrix(segments, cols, data)?;
        self.push("segment_sum", value, Op::SegmentSum(x, segment))
    }

    /// Softmax of each column taken separately within each segment of rows.
    pub fn segment_softmax(&mut self, x: Var, segment: Index, segments: usize) -> Result<Var> {
        let tx = self.value(x);
        let (rows, cols) = tx.dims2();
        check_segments("segment_softmax", rows, &segment, segments)?;
        let mut max = vec![f64::NEG_INFINITY; segments * cols];
        for (r, &s) in segment.iter().enumerate() {
            for (m, v) in max[s * cols..(s + 1) * cols].iter_mut().zip(tx.row(r)) {
                *m = m.max(*v);
            }
        }
        let mut data = vec![0.0; rows * cols];
        let mut total = vec![0.0; segments * cols];
        for (r, &s) in segment.iter().enumerate() {
            for c in 0..cols {
                let e = math::exp(tx.get(r, c) - max[s * cols + c]);
                data[r * cols + c] = e;
                total[s * cols + c] += e;
            }
        }
        for (r, &s) in segment.iter().enumerate() {
            for c in 0..cols {
                data[r * cols + c] /= total[s * cols + c];
            }
        }
        let value = like(tx, data);
        self.push(
            "segment_softmax",
            value,
            Op::SegmentSoftmax(x, segment, segments),
        )
    }

    /// Softmax across the columns of each row.
    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let tx = self.value(x);
        let (rows, cols) = tx.dims2();
        if cols == 0 {
            return Err(Error::EmptyNormalization);
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            data.extend(kernels::softmax(tx.row(r))?);
        }
        let value = like(tx, data);
        self.push("softmax_rows", value, Op::SoftmaxRows(x))
    }

    /// Picks `x[r, column[r]]` for every row, giving an `n x 1` column.
    pub fn pick_cols(&mut self, x: Var, column: Index) -> Result<Var> {
        let tx = self.value(x);
        let (rows, cols) = tx.dims2();
        if column.len() != rows || column.iter().any(|&c| c >= cols) {
            return Err(crate::error::domain(
                "pick_cols",
                "column index per row out of range",
            ));
        }
        let data = column
            .iter()
            .enumerate()
            .map(|(r, &c)| tx.get(r, c))
            .collect();
        let value = Tensor::matrix(rows, 1, data)?;
        self.push("pick_cols", value, Op::PickCols(x, column))
    }

    pub fn batch_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (value, stats) = kernels::batch_norm_with_stats(
            self.value(x),
            self.value(gamma),
            self.value(beta),
            eps,
        )?;
        self.push(
            "batch_norm",
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                stats,
            },
        )
    }

    /// Applies a constant linear operator to the rows of `x`.
    pub fn linear(&mut self, x: Var, operator: Arc<dyn LinearOperator>) -> Result<Var> {
        let tx = self.value(x);
        if tx.rows() != operator.cols() {
            return Err(Error::Shape {
                op: "linear",
                left: vec![operator.rows(), operator.cols()],
                right: tx.shape().to_vec(),
            });
        }
        let value = operator.apply(tx);
        self.push("linear", value, Op::Linear(x, operator))
    }

    /// Gradients of the one-element `root` with respect to all nodes that
    /// require them. Only leaf gradients are retained.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_value = self.value(root);
        if root_value.len() != 1 {
            return Err(crate::error::domain(
                "backward",
                "root must hold exactly one value",
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::full(root_value.shape(), 1.0));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(grad) = grads[i].take() else {
                continue;
            };
            self.backward_node(node, &grad, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], var: Var, grad: Tensor) {
        if !self.nodes[var.0].requires_grad {
            return;
        }
        match &mut grads[var.0] {
            Some(existing) => existing.add_assign(&grad),
            slot @ None => *slot = Some(grad),
        }
    }

    fn backward_node(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.requires_grad(*a) {
                    self.accumulate(grads, *a, g.matmul_nt(tb));
                }
                if self.requires_grad(*b) {
                    self.accumulate(grads, *b, ta.matmul_tn(g));
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                self.accumulate(grads, *a, g.zip_map(tb, |d, y| d * y));
                self.accumulate(grads, *b, g.zip_map(ta, |d, x| d * x));
            }
            Op::AddRow(x, row) => {
                self.accumulate(grads, *x, g.clone());
                if self.requires_grad(*row) {
                    let cols = g.cols();
                    let mut acc = vec![0.0; cols];
                    if cols > 0 {
                        for chunk in g.data().chunks_exact(cols) {
                            for (a, v) in acc.iter_mut().zip(chunk) {
                                *a += v;
                            }
                        }
                    }
                    let tr = self.value(*row);
                    self.accumulate(grads, *row, like(tr, acc));
                }
            }
            Op::MulCol(x, col) => {
                let (tx, tc) = (self.value(*x), self.value(*col));
                let (rows, cols) = tx.dims2();
                if self.requires_grad(*x) {
                    let mut dx = g.data().to_vec();
                    for r in 0..rows {
                        let s = tc.data()[r];
                        for v in &mut dx[r * cols..(r + 1) * cols] {
                            *v *= s;
                        }
                    }
                    self.accumulate(grads, *x, like(tx, dx));
                }
                if self.requires_grad(*col) {
                    let dc = (0..rows)
                        .map(|r| g.row(r).iter().zip(tx.row(r)).map(|(d, v)| d * v).sum())
                        .collect();
                    self.accumulate(grads, *col, like(tc, dc));
                }
            }
            Op::Scale(x, s) => {
                let (tx, ts) = (self.value(*x), self.value(*s));
                let k = ts.item();
                self.accumulate(grads, *x, g.map(|d| d * k));
                if self.requires_grad(*s) {
                    let ds = g.data().iter().zip(tx.data()).map(|(d, v)| d * v).sum();
                    self.accumulate(grads, *s, like(ts, vec![ds]));
                }
            }
            Op::Affine(x, a) => {
                let a = *a;
                self.accumulate(grads, *x, g.map(|d| d * a));
            }
            Op::Unary(x, f) => {
                let tx = self.value(*x);
                let data = g
                    .data()
                    .iter()
                    .zip(tx.data())
                    .zip(node.value.data())
                    .map(|((d, &xi), &yi)| d * f.derivative(xi, yi))
                    .collect();
                self.accumulate(grads, *x, like(tx, data));
            }
            Op::SumAll(x) => {
                let tx = self.value(*x);
                self.accumulate(grads, *x, Tensor::full(tx.shape(), g.item()));
            }
            Op::RowSum(x) => {
                let tx = self.value(*x);
                let (rows, cols) = tx.dims2();
                let mut data = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    data.extend(core::iter::repeat_n(g.data()[r], cols));
                }
                self.accumulate(grads, *x, like(tx, data));
            }
            Op::ConcatCols(parts) => {
                let rows = g.rows();
                let mut offset = 0;
                for &p in parts {
                    let tp = self.value(p);
                    let width = tp.cols();
                    if self.requires_grad(p) {
                        let mut data = Vec::with_capacity(rows * width);
                        for r in 0..rows {
                            data.extend_from_slice(&g.row(r)[offset..offset + width]);
                        }
                        self.accumulate(grads, p, like(tp, data));
                    }
                    offset += width;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let tp = self.value(p);
                    let len = tp.len();
                    if self.requires_grad(p) {
                        let data = g.data()[offset..offset + len].to_vec();
                        self.accumulate(grads, p, like(tp, data));
                    }
                    offset += len;
                }
            }
            Op::GatherRows(x, index) => {
                let tx = self.value(*x);
                let cols = tx.cols();
                let mut data = vec![0.0; tx.len()];
                for (r, &i) in index.iter().enumerate() {
                    for (o, d) in data[i * cols..(i + 1) * cols].iter_mut().zip(g.row(r)) {
                        *o += d;
                    }
                }
                self.accumulate(grads, *x, like(tx, data));
            }
            Op::SegmentSum(x, segment) => {
                let tx = self.value(*x);
                let cols = tx.cols();
                let mut data = Vec::with_capacity(tx.len());
                for &s in segment.iter() {
                    data.extend_from_slice(&g.data()[s * cols..(s + 1) * cols]);
                }
                self.accumulate(grads, *x, like(tx, data));
            }
            Op::SegmentSoftmax(x, segment, segments) => {
                let y = &node.value;
                let cols = y.cols();
                let mut inner = vec![0.0; segments * cols];
                for (r, &s) in segment.iter().enumerate() {
                    for c in 0..cols {
                        inner[s * cols + c] += y.get(r, c) * g.get(r, c);
                    }
                }
                let mut data = Vec::with_capacity(y.len());
                for (r, &s) in segment.iter().enumerate() {
                    for c in 0..cols {
                        data.push(y.get(r, c) * (g.get(r, c) - inner[s * cols + c]));
                    }
                }
                self.accumulate(grads, *x, like(y, data));
            }
            Op::SoftmaxRows(x) => {
                let y = &node.value;
                let (rows, cols) = y.dims2();
                let mut data = Vec::with_capacity(y.len());
                for r in 0..rows {
                    let dot: f64 = y.row(r).iter().zip(g.row(r)).map(|(a, b)| a * b).sum();
                    for c in 0..cols {
                        data.push(y.get(r, c) * (g.get(r, c) - dot));
                    }
                }
                self.accumulate(grads, *x, like(y, data));
            }
            Op::PickCols(x, column) => {
                let tx = self.value(*x);
                let mut data = vec![0.0; tx.len()];
                let cols = tx.cols();
                for (r, &c) in column.iter().enumerate() {
                    data[r * cols + c] = g.data()[r];
                }
                self.accumulate(grads, *x, like(tx, data));
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                stats,
            } => {
                let (tx, tg, tb) = (self.value(*x), self.value(*gamma), self.value(*beta));
                let (n, d) = tx.dims2();
                let xhat = &stats.normalized;
                let mut dgamma = vec![0.0; d];
                let mut dbeta = vec![0.0; d];
                let mut sum_dxhat = vec![0.0; d];
                let mut sum_dxhat_xhat = vec![0.0; d];
                for r in 0..n {
                    for c in 0..d {
                        let dy = g.get(r, c);
                        let xh = xhat.get(r, c);
                        dbeta[c] += dy;
                        dgamma[c] += dy * xh;
                        let dxh = dy * tg.data()[c];
                        sum_dxhat[c] += dxh;
                        sum_dxhat_xhat[c] += dxh * xh;
                    }
                }
                if self.requires_grad(*x) {
                    let nf = n as f64;
                    let mut dx = vec![0.0; n * d];
                    for r in 0..n {
                        for c in 0..d {
                            let dxh = g.get(r, c) * tg.data()[c];
                            dx[r * d + c] = stats.inv_std[c] / nf
                                * (nf * dxh - sum_dxhat[c] - xhat.get(r, c) * sum_dxhat_xhat[c]);
                        }
                    }
                    self.accumulate(grads, *x, like(tx, dx));
                }
                self.accumulate(grads, *gamma, like(tg, dgamma));
                self.accumulate(grads, *beta, like(tb, dbeta));
            }
            Op::Linear(x, operator) => {
                let tx = self.value(*x);
                let dx = operator.apply_transpose(g);
                self.accumulate(grads, *x, like(tx, dx.into_data()));
            }
        }
    }
}

fn check_segments(op: &'static str, rows: usize, segment: &[usize], segments: usize) -> Result<()> {
    if segment.len() != rows {
        return Err(Error::Shape {
            op,
            left: vec![rows],
            right: vec![segment.len()],
        });
    }
    if let Some(&bad) = segment.iter().find(|&&s| s >= segments) {
        return Err(crate::error::domain(
            op,
            alloc::format!("segment {bad} out of range for {segments} segments"),
        ));
    }
    Ok(())
}
