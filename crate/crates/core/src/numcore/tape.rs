//! Reverse-mode differentiation over dense matrices.
//!
//! Every operation is recorded on a [`Tape`] together with its cached forward
//! value. [`Tape::backward`] walks the nodes in reverse order and returns the
//! gradient of a scalar root with respect to every leaf.
//!
//! ```
//! use glue_core::numcore::{Matrix, Tape};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Matrix::scalar(3.0));
//! let y = tape.square(x).unwrap();
//! assert_eq!(tape.value(y).item(), Some(9.0));
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.get(x).unwrap().item(), Some(6.0));
//! ```

use std::fmt;

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Handle to a node on a [`Tape`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Recorded operation kinds.
#[derive(Clone, Debug)]
pub enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    /// `a` (r x c) plus a broadcast 1 x c row.
    AddRow(NodeId, NodeId),
    /// `a` (r x c) with every row scaled by the matching entry of an r x 1 column.
    MulCol(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId, f64),
    /// Column-wise concatenation of matrices with equal row counts.
    HConcat(Vec<NodeId>),
    /// Row-wise concatenation of matrices with equal column counts.
    VConcat(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    LeakyRelu(NodeId, f64),
    Relu(NodeId),
    Softplus(NodeId),
    Exp(NodeId),
    Log(NodeId),
    Square(NodeId),
    /// Sum of all entries, 1 x 1.
    Sum(NodeId),
    /// Per-row sum, r x 1.
    SumCols(NodeId),
    SoftmaxRows(NodeId),
    GatherRows(NodeId, Vec<usize>),
    /// Sums consecutive groups of `group` rows: (g*n) x c -> n x c.
    SegmentSum(NodeId, usize),
    Reshape(NodeId, usize, usize),
}

impl Op {
    pub fn kind(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "elementwise-mul",
            Op::Div(..) => "div",
            Op::AddRow(..) => "add-row",
            Op::MulCol(..) => "mul-col",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add-scalar",
            Op::HConcat(..) => "concat",
            Op::VConcat(..) => "vconcat",
            Op::SliceCols(..) => "slice-cols",
            Op::LeakyRelu(..) => "leaky-relu",
            Op::Relu(..) => "relu",
            Op::Softplus(..) => "softplus",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Square(..) => "square",
            Op::Sum(..) => "reduce-sum",
            Op::SumCols(..) => "sum-cols",
            Op::SoftmaxRows(..) => "softmax-row",
            Op::GatherRows(..) => "gather-rows",
            Op::SegmentSum(..) => "segment-sum",
            Op::Reshape(..) => "reshape",
        }
    }

    pub fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Div(a, b)
            | Op::AddRow(a, b)
            | Op::MulCol(a, b) => vec![*a, *b],
            Op::HConcat(xs) | Op::VConcat(xs) => xs.clone(),
            Op::Transpose(a)
            | Op::Scale(a, _)
            | Op::AddScalar(a, _)
            | Op::SliceCols(a, ..)
            | Op::LeakyRelu(a, _)
            | Op::Relu(a)
            | Op::Softplus(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Square(a)
            | Op::Sum(a)
            | Op::SumCols(a)
            | Op::SoftmaxRows(a)
            | Op::GatherRows(a, _)
            | Op::SegmentSum(a, _)
            | Op::Reshape(a, ..) => vec![*a],
        }
    }
}

#[derive(Clone)]
struct Node {
    op: Op,
    value: Matrix,
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

/// Row softmax with max subtraction. Entries equal to `-inf` get weight 0.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    out
}

/// Forward evaluation of a single op from its input values.
fn eval(op: &Op, vals: &[&Matrix]) -> Result<Matrix> {
    let kind = op.kind();
    let same = |a: &Matrix, b: &Matrix| -> Result<()> {
        if a.same_shape(b) {
            Ok(())
        } else {
            Err(Error::shape(
                kind,
                format!(
                    "{}x{} vs {}x{}",
                    a.rows(),
                    a.cols(),
                    b.rows(),
                    b.cols()
                ),
            ))
        }
    };
    Ok(match op {
        Op::Leaf => unreachable!("leaves carry their own value"),
        Op::MatMul(..) => vals[0].matmul(vals[1])?,
        Op::Transpose(_) => vals[0].transpose(),
        Op::Add(..) => {
            same(vals[0], vals[1])?;
            vals[0].zip_map(vals[1], |a, b| a + b)
        }
        Op::Sub(..) => {
            same(vals[0], vals[1])?;
            vals[0].zip_map(vals[1], |a, b| a - b)
        }
        Op::Mul(..) => {
            same(vals[0], vals[1])?;
            vals[0].zip_map(vals[1], |a, b| a * b)
        }
        Op::Div(..) => {
            same(vals[0], vals[1])?;
            vals[0].zip_map(vals[1], |a, b| a / b)
        }
        Op::AddRow(..) => {
            let (a, row) = (vals[0], vals[1]);
            if row.rows() != 1 || row.cols() != a.cols() {
                return Err(Error::shape(
                    kind,
                    format!(
                        "{}x{} plus row {}x{}",
                        a.rows(),
                        a.cols(),
                        row.rows(),
                        row.cols()
                    ),
                ));
            }
            Matrix::from_fn(a.rows(), a.cols(), |r, c| a.get(r, c) + row.get(0, c))
        }
        Op::MulCol(..) => {
            let (a, col) = (vals[0], vals[1]);
            if col.cols() != 1 || col.rows() != a.rows() {
                return Err(Error::shape(
                    kind,
                    format!(
                        "{}x{} times column {}x{}",
                        a.rows(),
                        a.cols(),
                        col.rows(),
                        col.cols()
                    ),
                ));
            }
            Matrix::from_fn(a.rows(), a.cols(), |r, c| a.get(r, c) * col.get(r, 0))
        }
        Op::Scale(_, s) => vals[0].map(|x| x * s),
        Op::AddScalar(_, s) => vals[0].map(|x| x + s),
        Op::HConcat(_) => {
            let rows = vals[0].rows();
            if let Some(bad) = vals.iter().find(|v| v.rows() != rows) {
                return Err(Error::shape(
                    kind,
                    format!("row counts {rows} and {}", bad.rows()),
                ));
            }
            let cols: usize = vals.iter().map(|v| v.cols()).sum();
            let mut data = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for v in vals {
                    data.extend_from_slice(v.row(r));
                }
            }
            Matrix::from_vec(rows, cols, data)?
        }
        Op::VConcat(_) => {
            let cols = vals[0].cols();
            if let Some(bad) = vals.iter().find(|v| v.cols() != cols) {
                return Err(Error::shape(
                    kind,
                    format!("column counts {cols} and {}", bad.cols()),
                ));
            }
            let rows: usize = vals.iter().map(|v| v.rows()).sum();
            let mut data = Vec::with_capacity(rows * cols);
            for v in vals {
                data.extend_from_slice(v.data());
            }
            Matrix::from_vec(rows, cols, data)?
        }
        Op::SliceCols(_, start, end) => {
            let a = vals[0];
            if start >= end || *end > a.cols() {
                return Err(Error::shape(
                    kind,
                    format!("columns {start}..{end} of a {}-column matrix", a.cols()),
                ));
            }
            Matrix::from_fn(a.rows(), end - start, |r, c| a.get(r, start + c))
        }
        Op::LeakyRelu(_, slope) => vals[0].map(|x| leaky_relu(x, *slope)),
        Op::Relu(_) => vals[0].map(|x| x.max(0.0)),
        Op::Softplus(_) => vals[0].map(softplus),
        Op::Exp(_) => vals[0].map(f64::exp),
        Op::Log(_) => vals[0].map(f64::ln),
        Op::Square(_) => vals[0].map(|x| x * x),
        Op::Sum(_) => Matrix::scalar(vals[0].sum()),
        Op::SumCols(_) => {
            let a = vals[0];
            Matrix::column((0..a.rows()).map(|r| a.row(r).iter().sum()).collect())
        }
        Op::SoftmaxRows(_) => softmax_rows(vals[0]),
        Op::GatherRows(_, idx) => {
            let a = vals[0];
            if let Some(&bad) = idx.iter().find(|&&i| i >= a.rows()) {
                return Err(Error::shape(
                    kind,
                    format!("row index {bad} out of {} rows", a.rows()),
                ));
            }
            a.select_rows(idx)
        }
        Op::SegmentSum(_, group) => {
            let a = vals[0];
            if *group == 0 || !a.rows().is_multiple_of(*group) {
                return Err(Error::shape(
                    kind,
                    format!("{} rows not divisible into groups of {group}", a.rows()),
                ));
            }
            let n = a.rows() / group;
            let mut out = Matrix::zeros(n, a.cols());
            for r in 0..a.rows() {
                let src = a.row(r).to_vec();
                for (o, s) in out.row_mut(r / group).iter_mut().zip(src) {
                    *o += s;
                }
            }
            out
        }
        Op::Reshape(_, r, c) => vals[0].reshape(*r, *c)?,
    })
}

/// Gradient map returned by [`Tape::backward`], one entry per leaf.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient for `id`, or zeros shaped like `like` if the leaf did not
    /// influence the root.
    pub fn get_or_zeros(&self, id: NodeId, like: &Matrix) -> Matrix {
        self.get(id)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(like.rows(), like.cols()))
    }
}

/// A recording of matrix operations with cached forward values.
#[derive(Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("nodes", &self.nodes.len())
            .finish()
    }
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

    /// Adds a leaf (parameter or constant input).
    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id.0].op
    }

    /// Records `op`, computes its value and returns the new node.
    pub fn record(&mut self, op: Op) -> Result<NodeId> {
        if matches!(op, Op::Leaf) {
            return Err(Error::invalid("use Tape::leaf to add leaves"));
        }
        let inputs = op.inputs();
        if inputs.is_empty() {
            return Err(Error::shape(op.kind(), "no inputs"));
        }
        if let Some(bad) = inputs.iter().find(|id| id.0 >= self.nodes.len()) {
            return Err(Error::UnknownNode(bad.0));
        }
        let vals: Vec<&Matrix> = inputs.iter().map(|id| &self.nodes[id.0].value).collect();
        let value = eval(&op, &vals)?;
        self.nodes.push(Node { op, value });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Recomputes every non-leaf value from the leaves, in tape order.
    pub fn replay(&self) -> Result<Vec<Matrix>> {
        let mut values: Vec<Matrix> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match &node.op {
                Op::Leaf => node.value.clone(),
                op => {
                    let ins = op.inputs();
                    let vals: Vec<&Matrix> = ins.iter().map(|id| &values[id.0]).collect();
                    eval(op, &vals)?
                }
            };
            values.push(v);
        }
        Ok(values)
    }

    /// True when [`replay`](Self::replay) reproduces every cached value bitwise.
    pub fn replay_matches(&self) -> Result<bool> {
        let values = self.replay()?;
        Ok(values.iter().zip(&self.nodes).all(|(v, n)| {
            v.shape() == n.value.shape()
                && v.data()
                    .iter()
                    .zip(n.value.data())
                    .all(|(a, b)| a.to_bits() == b.to_bits())
        }))
    }

    /// Gradient of the scalar node `root` with respect to every leaf.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        if root.0 >= self.nodes.len() {
            return Err(Error::UnknownNode(root.0));
        }
        let rv = &self.nodes[root.0].value;
        if rv.shape() != (1, 1) {
            return Err(Error::NonScalarRoot {
                rows: rv.rows(),
                cols: rv.cols(),
            });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
                continue;
            }
            for (input, contrib) in self.local_grads(node, &g) {
                match &mut grads[input.0] {
                    Some(acc) => acc.add_assign(&contrib),
                    slot @ None => *slot = Some(contrib),
                }
            }
        }

        for (idx, node) in self.nodes.iter().enumerate().take(root.0 + 1) {
            if !matches!(node.op, Op::Leaf) {
                grads[idx] = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn local_grads(&self, node: &Node, g: &Matrix) -> Vec<(NodeId, Matrix)> {
        let val = |id: NodeId| &self.nodes[id.0].value;
        let out = &node.value;
        match &node.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                let ga = g.matmul(&val(*b).transpose()).expect("shapes checked");
                let gb = val(*a).transpose().matmul(g).expect("shapes checked");
                vec![(*a, ga), (*b, gb)]
            }
            Op::Transpose(a) => vec![(*a, g.transpose())],
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.map(|x| -x))],
            Op::Mul(a, b) => vec![
                (*a, g.zip_map(val(*b), |g, y| g * y)),
                (*b, g.zip_map(val(*a), |g, x| g * x)),
            ],
            Op::Div(a, b) => {
                let (x, y) = (val(*a), val(*b));
                let ga = g.zip_map(y, |g, y| g / y);
                let mut gb = g.clone();
                for ((gb, x), y) in gb.data_mut().iter_mut().zip(x.data()).zip(y.data()) {
                    *gb = -*gb * x / (y * y);
                }
                vec![(*a, ga), (*b, gb)]
            }
            Op::AddRow(a, row) => {
                let mut gr = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (acc, x) in gr.row_mut(0).iter_mut().zip(g.row(r)) {
                        *acc += x;
                    }
                }
                vec![(*a, g.clone()), (*row, gr)]
            }
            Op::MulCol(a, col) => {
                let (x, c) = (val(*a), val(*col));
                let ga = Matrix::from_fn(g.rows(), g.cols(), |r, k| g.get(r, k) * c.get(r, 0));
                let gc = Matrix::column(
                    (0..g.rows())
                        .map(|r| g.row(r).iter().zip(x.row(r)).map(|(g, x)| g * x).sum())
                        .collect(),
                );
                vec![(*a, ga), (*col, gc)]
            }
            Op::Scale(a, s) => vec![(*a, g.map(|x| x * s))],
            Op::AddScalar(a, _) => vec![(*a, g.clone())],
            Op::HConcat(xs) => {
                let mut offset = 0;
                xs.iter()
                    .map(|id| {
                        let cols = val(*id).cols();
                        let part = Matrix::from_fn(g.rows(), cols, |r, c| g.get(r, offset + c));
                        offset += cols;
                        (*id, part)
                    })
                    .collect()
            }
            Op::VConcat(xs) => {
                let mut offset = 0;
                xs.iter()
                    .map(|id| {
                        let rows = val(*id).rows();
                        let part = Matrix::from_fn(rows, g.cols(), |r, c| g.get(offset + r, c));
                        offset += rows;
                        (*id, part)
                    })
                    .collect()
            }
            Op::SliceCols(a, start, _) => {
                let x = val(*a);
                let mut ga = Matrix::zeros(x.rows(), x.cols());
                for r in 0..g.rows() {
                    for c in 0..g.cols() {
                        ga.set(r, start + c, g.get(r, c));
                    }
                }
                vec![(*a, ga)]
            }
            // Kinks at exactly zero take the positive-side slope.
            Op::LeakyRelu(a, slope) => vec![(
                *a,
                g.zip_map(val(*a), |g, x| if x >= 0.0 { g } else { g * slope }),
            )],
            Op::Relu(a) => vec![(
                *a,
                g.zip_map(val(*a), |g, x| if x >= 0.0 { g } else { 0.0 }),
            )],
            Op::Softplus(a) => vec![(*a, g.zip_map(val(*a), |g, x| g * sigmoid(x)))],
            Op::Exp(a) => vec![(*a, g.zip_map(out, |g, y| g * y))],
            Op::Log(a) => vec![(*a, g.zip_map(val(*a), |g, x| g / x))],
            Op::Square(a) => vec![(*a, g.zip_map(val(*a), |g, x| 2.0 * g * x))],
            Op::Sum(a) => {
                let x = val(*a);
                vec![(*a, Matrix::filled(x.rows(), x.cols(), g.get(0, 0)))]
            }
            Op::SumCols(a) => {
                let x = val(*a);
                vec![(*a, Matrix::from_fn(x.rows(), x.cols(), |r, _| g.get(r, 0)))]
            }
            Op::SoftmaxRows(a) => {
                let mut ga = g.clone();
                for r in 0..g.rows() {
                    let y = out.row(r);
                    let dot: f64 = g.row(r).iter().zip(y).map(|(g, y)| g * y).sum();
                    for (gi, yi) in ga.row_mut(r).iter_mut().zip(y) {
                        *gi = yi * (*gi - dot);
                    }
                }
                vec![(*a, ga)]
            }
            Op::GatherRows(a, idx) => {
                let x = val(*a);
                let mut ga = Matrix::zeros(x.rows(), x.cols());
                for (r, &src) in idx.iter().enumerate() {
                    for (acc, gv) in ga.row_mut(src).iter_mut().zip(g.row(r)) {
                        *acc += gv;
                    }
                }
                vec![(*a, ga)]
            }
            Op::SegmentSum(a, group) => {
                let x = val(*a);
                vec![(
                    *a,
                    Matrix::from_fn(x.rows(), x.cols(), |r, c| g.get(r / group, c)),
                )]
            }
            Op::Reshape(a, ..) => {
                let x = val(*a);
                vec![(*a, g.reshape(x.rows(), x.cols()).expect("same size"))]
            }
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Transpose(a))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Mul(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Div(a, b))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        self.record(Op::AddRow(a, row))
    }

    pub fn mul_col(&mut self, a: NodeId, col: NodeId) -> Result<NodeId> {
        self.record(Op::MulCol(a, col))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> Result<NodeId> {
        self.record(Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: NodeId, s: f64) -> Result<NodeId> {
        self.record(Op::AddScalar(a, s))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.record(Op::HConcat(parts.to_vec()))
    }

    pub fn vconcat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.record(Op::VConcat(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        self.record(Op::SliceCols(a, start, end))
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> Result<NodeId> {
        self.record(Op::LeakyRelu(a, slope))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Relu(a))
    }

    pub fn softplus(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Softplus(a))
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Exp(a))
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Log(a))
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Square(a))
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Sum(a))
    }

    pub fn sum_cols(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::SumCols(a))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::SoftmaxRows(a))
    }

    pub fn gather_rows(&mut self, a: NodeId, indices: Vec<usize>) -> Result<NodeId> {
        self.record(Op::GatherRows(a, indices))
    }

    pub fn segment_sum(&mut self, a: NodeId, group: usize) -> Result<NodeId> {
        self.record(Op::SegmentSum(a, group))
    }

    pub fn reshape(&mut self, a: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        self.record(Op::Reshape(a, rows, cols))
    }
}

/// Central-difference gradient estimate of `f` at `x`.
pub fn finite_difference_grad(f: impl Fn(&Matrix) -> f64, x: &Matrix, eps: f64) -> Matrix {
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let up = f(&probe);
        probe.data_mut()[i] = orig - eps;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / (2.0 * eps);
    }
    grad
}
