//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! The tape is define-by-run: every forward call appends a node recording the
//! producing operation and its inputs, and `backward` replays the tape in
//! reverse. A fresh tape is built per forward pass, so dynamically changing
//! neighbor sets never invalidate recorded structure.

mod array;
mod check;

pub use array::{Array, Shape};
pub use check::{central_difference, grad_check};

use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The closed set of differentiable operations.
#[derive(Clone, Debug)]
pub enum Op {
    /// Input node: parameter or constant. Never mutated by backward.
    Leaf,
    /// `A @ x` (matrix-vector) or `A @ B` (matrix-matrix).
    MatMul,
    /// `A^T @ x` without materializing the transpose.
    MatMulT,
    /// Elementwise sum; one side may be a scalar (broadcast).
    Add,
    /// Elementwise product; one side may be a scalar (broadcast).
    Mul,
    /// Multiply by a compile-time constant.
    Scale(f64),
    /// Flatten all inputs row-major into one vector.
    Concat,
    /// Stack same-length vectors as the columns of a matrix.
    StackCols,
    /// max(x, slope * x).
    LeakyRelu(f64),
    /// Logistic sigmoid.
    Sigmoid,
    /// Softmax over a vector, computed with max subtraction.
    Softmax,
    /// Natural log.
    Ln,
    /// Sum of all entries.
    Sum,
    /// Arithmetic mean of all entries.
    Mean,
    /// Inner product of two vectors.
    Dot,
    /// Select rows of an embedding table; backward accumulates into
    /// repeated rows.
    Gather(Vec<usize>),
    /// Select a single row of an embedding table as a vector.
    GatherRow(usize),
    /// Contiguous range of a vector (the inverse of a concat piece).
    Slice { start: usize, len: usize },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul => "matmul",
            Op::Add => "add",
            Op::Mul => "mul",
            Op::Scale(_) => "scale",
            Op::Concat => "concat",
            Op::StackCols => "stack_cols",
            Op::LeakyRelu(_) => "leaky_relu",
            Op::Sigmoid => "sigmoid",
            Op::Softmax => "softmax",
            Op::Ln => "ln",
            Op::Sum => "sum",
            Op::Mean => "mean",
            Op::Dot => "dot",
            Op::Gather(_) => "gather",
            Op::GatherRow(_) => "gather_row",
        }
    }
}

/// Input references, inlined for the common unary/binary cases.
enum Inputs {
    None,
    One(NodeId),
    Two(NodeId, NodeId),
    Many(Vec<NodeId>),
}

impl Inputs {
    fn from_slice(ids: &[NodeId]) -> Inputs {
        match ids {
            [] => Inputs::None,
            [a] => Inputs::One(*a),
            [a, b] => Inputs::Two(*a, *b),
            many => Inputs::Many(many.to_vec()),
        }
    }

    fn len(&self) -> usize {
        match self {
            Inputs::None => 0,
            Inputs::One(_) => 1,
            Inputs::Two(..) => 2,
            Inputs::Many(v) => v.len(),
        }
    }

    fn is_empty(&self) -> bool {
        matches!(self, Inputs::None)
    }

    fn at(&self, i: usize) -> NodeId {
        match (self, i) {
            (Inputs::One(a), 0) => *a,
            (Inputs::Two(a, _), 0) => *a,
            (Inputs::Two(_, b), 1) => *b,
            (Inputs::Many(v), _) => v[i],
            _ => panic!("input index {i} out of range"),
        }
    }
}

struct Node {
    value: Array,
    grad: Vec<f64>,
    op: Op,
    inputs: Inputs,
}

/// A differentiation graph. Single-threaded; build one per forward pass.
///
/// The default tape allocates a same-shape gradient per node; a
/// [`Tape::forward_only`] tape skips gradient storage for pure scoring.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    forward_only: bool,
}

fn shape_err(op: &Op, inputs: &[&Array], details: &str) -> Error {
    let shapes: Vec<String> = inputs.iter().map(|a| a.shape().to_string()).collect();
    Error::ShapeMismatch {
        op: op.name(),
        details: format!("{details} (input shapes: {})", shapes.join(", ")),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), forward_only: false }
    }

    /// A tape that skips gradient storage; `backward` is unavailable.
    pub fn forward_only() -> Self {
        Tape { nodes: Vec::new(), forward_only: true }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Register an input value. Leaves never change during backward.
    pub fn leaf(&mut self, value: Array) -> NodeId {
        self.push_node(value, Op::Leaf, Inputs::None)
    }

    pub fn scalar(&mut self, v: f64) -> NodeId {
        self.leaf(Array::scalar(v))
    }

    pub fn value(&self, id: NodeId) -> &Array {
        &self.nodes[id.0].value
    }

    /// Gradient accumulated for `id`; zeros before `backward` has run.
    pub fn grad(&self, id: NodeId) -> &[f64] {
        assert!(!self.forward_only, "gradients are not tracked on a forward-only tape");
        &self.nodes[id.0].grad
    }

    pub fn grad_array(&self, id: NodeId) -> Array {
        let n = &self.nodes[id.0];
        Array::new(n.value.shape(), n.grad.clone())
    }

    fn push_node(&mut self, value: Array, op: Op, inputs: Inputs) -> NodeId {
        let grad = if self.forward_only { Vec::new() } else { vec![0.0; value.numel()] };
        self.nodes.push(Node { value, grad, op, inputs });
        NodeId(self.nodes.len() - 1)
    }

    /// Apply an operation to existing nodes, recording it for backward.
    pub fn apply(&mut self, op: Op, inputs: &[NodeId]) -> Result<NodeId> {
        let vals: Vec<&Array> = inputs.iter().map(|id| &self.nodes[id.0].value).collect();
        let value = forward(&op, &vals)?;
        Ok(self.push_node(value, op, Inputs::from_slice(inputs)))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Op::MatMul, &[a, b])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Op::Add, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Op::Mul, &[a, b])
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        self.apply(Op::Scale(c), &[x])
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.apply(Op::Concat, parts)
    }

    pub fn stack_cols(&mut self, cols: &[NodeId]) -> Result<NodeId> {
        self.apply(Op::StackCols, cols)
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: f64) -> Result<NodeId> {
        self.apply(Op::LeakyRelu(slope), &[x])
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Op::Sigmoid, &[x])
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Op::Softmax, &[x])
    }

    pub fn ln(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Op::Ln, &[x])
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Op::Sum, &[x])
    }

    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Op::Mean, &[x])
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Op::Dot, &[a, b])
    }

    pub fn gather(&mut self, table: NodeId, indices: Vec<usize>) -> Result<NodeId> {
        self.apply(Op::Gather(indices), &[table])
    }

    pub fn gather_row(&mut self, table: NodeId, index: usize) -> Result<NodeId> {
        self.apply(Op::GatherRow(index), &[table])
    }

    /// Propagate gradients from a scalar root to every reachable node.
    /// Unreachable nodes keep zero gradients.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        assert!(!self.forward_only, "backward on a forward-only tape");
        let root_shape = self.nodes[root.0].value.shape();
        if !root_shape.is_scalar() {
            return Err(Error::NonScalarRoot(root_shape));
        }
        for n in &mut self.nodes {
            n.grad.iter_mut().for_each(|g| *g = 0.0);
        }
        self.nodes[root.0].grad[0] = 1.0;

        for i in (0..=root.0).rev() {
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &rest[0];
            if node.inputs.is_empty() {
                continue;
            }
            backward_step(node, before);
        }
        Ok(())
    }
}

fn forward(op: &Op, inputs: &[&Array]) -> Result<Array> {
    let arity_err = |n: usize| shape_err(op, inputs, &format!("expected {n} inputs, got {}", inputs.len()));
    match op {
        Op::Leaf => Err(shape_err(op, inputs, "leaf is not applicable")),
        Op::MatMul => {
            if inputs.len() != 2 {
                return Err(arity_err(2));
            }
            let (a, b) = (inputs[0], inputs[1]);
            match (a.shape(), b.shape()) {
                (Shape::Matrix { rows, cols }, Shape::Vector(n)) if cols == n => {
                    let mut out = vec![0.0; rows];
                    let ad = a.as_slice();
                    let bd = b.as_slice();
                    for (i, o) in out.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for j in 0..cols {
                            acc += ad[i * cols + j] * bd[j];
                        }
                        *o = acc;
                    }
                    Ok(Array::vector(out))
                }
                (Shape::Matrix { rows: m, cols: k }, Shape::Matrix { rows: k2, cols: n }) if k == k2 => {
                    let mut out = vec![0.0; m * n];
                    let ad = a.as_slice();
                    let bd = b.as_slice();
                    for i in 0..m {
                        for l in 0..k {
                            let av = ad[i * k + l];
                            if av == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                out[i * n + j] += av * bd[l * n + j];
                            }
                        }
                    }
                    Ok(Array::matrix(m, n, out))
                }
                _ => Err(shape_err(op, inputs, "incompatible operands")),
            }
        }
        Op::Add => {
            if inputs.len() != 2 {
                return Err(arity_err(2));
            }
            let (a, b) = (inputs[0], inputs[1]);
            if a.shape() != b.shape() {
                return Err(shape_err(op, inputs, "operands must match"));
            }
            let data = a.iter().zip(b.iter()).map(|(x, y)| x + y).collect();
            Ok(Array::new(a.shape(), data))
        }
        Op::Mul => {
            if inputs.len() != 2 {
                return Err(arity_err(2));
            }
            let (a, b) = (inputs[0], inputs[1]);
            match (a.shape(), b.shape()) {
                (sa, sb) if sa == sb => {
                    let data = a.iter().zip(b.iter()).map(|(x, y)| x * y).collect();
                    Ok(Array::new(sa, data))
                }
                (Shape::Scalar, sb) => {
                    let s = a.item();
                    Ok(Array::new(sb, b.iter().map(|y| s * y).collect()))
                }
                (sa, Shape::Scalar) => {
                    let s = b.item();
                    Ok(Array::new(sa, a.iter().map(|x| x * s).collect()))
                }
                _ => Err(shape_err(op, inputs, "operands must match or one be scalar")),
            }
        }
        Op::Scale(c) => {
            if inputs.len() != 1 {
                return Err(arity_err(1));
            }
            let x = inputs[0];
            Ok(Array::new(x.shape(), x.iter().map(|v| v * c).collect()))
        }
        Op::Concat => {
            if inputs.is_empty() {
                return Err(shape_err(op, inputs, "needs at least one input"));
            }
            let mut data = Vec::with_capacity(inputs.iter().map(|a| a.numel()).sum());
            for a in inputs {
                data.extend_from_slice(a.as_slice());
            }
            Ok(Array::vector(data))
        }
        Op::StackCols => {
            if inputs.is_empty() {
                return Err(shape_err(op, inputs, "needs at least one input"));
            }
            let d = match inputs[0].shape() {
                Shape::Vector(d) => d,
                _ => return Err(shape_err(op, inputs, "inputs must be vectors")),
            };
            let k = inputs.len();
            if inputs.iter().any(|a| a.shape() != Shape::Vector(d)) {
                return Err(shape_err(op, inputs, "all columns must have equal length"));
            }
            let mut data = vec![0.0; d * k];
            for (j, a) in inputs.iter().enumerate() {
                for (i, v) in a.iter().enumerate() {
                    data[i * k + j] = *v;
                }
            }
            Ok(Array::matrix(d, k, data))
        }
        Op::LeakyRelu(slope) => {
            if inputs.len() != 1 {
                return Err(arity_err(1));
            }
            let x = inputs[0];
            let data = x.iter().map(|&v| if v >= 0.0 { v } else { slope * v }).collect();
            Ok(Array::new(x.shape(), data))
        }
        Op::Sigmoid => {
            if inputs.len() != 1 {
                return Err(arity_err(1));
            }
            let x = inputs[0];
            Ok(Array::new(x.shape(), x.iter().map(|&v| sigmoid(v)).collect()))
        }
        Op::Softmax => {
            if inputs.len() != 1 {
                return Err(arity_err(1));
            }
            let x = inputs[0];
            match x.shape() {
                Shape::Vector(n) if n >= 1 => {
                    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
                    let z: f64 = exps.iter().sum();
                    Ok(Array::vector(exps.into_iter().map(|e| e / z).collect()))
                }
                _ => Err(shape_err(op, inputs, "expects a non-empty vector")),
            }
        }
        Op::Ln => {
            if inputs.len() != 1 {
                return Err(arity_err(1));
            }
            let x = inputs[0];
            Ok(Array::new(x.shape(), x.iter().map(|&v| v.ln()).collect()))
        }
        Op::Sum => {
            if inputs.len() != 1 {
                return Err(arity_err(1));
            }
            Ok(Array::scalar(inputs[0].iter().sum()))
        }
        Op::Mean => {
            if inputs.len() != 1 {
                return Err(arity_err(1));
            }
            let x = inputs[0];
            if x.numel() == 0 {
                return Err(shape_err(op, inputs, "mean of empty value"));
            }
            Ok(Array::scalar(x.iter().sum::<f64>() / x.numel() as f64))
        }
        Op::Dot => {
            if inputs.len() != 2 {
                return Err(arity_err(2));
            }
            let (a, b) = (inputs[0], inputs[1]);
            match (a.shape(), b.shape()) {
                (Shape::Vector(n), Shape::Vector(m)) if n == m => {
                    Ok(Array::scalar(a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()))
                }
                _ => Err(shape_err(op, inputs, "expects equal-length vectors")),
            }
        }
        Op::Gather(indices) => {
            if inputs.len() != 1 {
                return Err(arity_err(1));
            }
            let table = inputs[0];
            match table.shape() {
                Shape::Matrix { rows, cols } => {
                    if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
                        return Err(shape_err(op, inputs, &format!("row {bad} out of range {rows}")));
                    }
                    let mut data = Vec::with_capacity(indices.len() * cols);
                    for &i in indices {
                        data.extend_from_slice(table.row(i));
                    }
                    Ok(Array::matrix(indices.len(), cols, data))
                }
                _ => Err(shape_err(op, inputs, "table must be a matrix")),
            }
        }
        Op::GatherRow(index) => {
            if inputs.len() != 1 {
                return Err(arity_err(1));
            }
            let table = inputs[0];
            match table.shape() {
                Shape::Matrix { rows, .. } => {
                    if *index >= rows {
                        return Err(shape_err(op, inputs, &format!("row {index} out of range {rows}")));
                    }
                    Ok(Array::vector(table.row(*index).to_vec()))
                }
                _ => Err(shape_err(op, inputs, "table must be a matrix")),
            }
        }
    }
}

fn backward_step(node: &Node, before: &mut [Node]) {
    let g = &node.grad;
    let ins = &node.inputs;
    match &node.op {
        Op::Leaf => {}
        Op::MatMul => {
            let (ai, bi) = (ins.at(0).0, ins.at(1).0);
            match (before[ai].value.shape(), before[bi].value.shape()) {
                (Shape::Matrix { rows, cols }, Shape::Vector(_)) => {
                    // COLD-SPLIT: borrow values immutably via raw copies of slices.
                    for i in 0..rows {
                        let gi = g[i];
                        if gi == 0.0 {
                            continue;
                        }
                        for j in 0..cols {
                            let bv = before[bi].value.as_slice()[j];
                            before[ai].grad[i * cols + j] += gi * bv;
                        }
                    }
                    for j in 0..cols {
                        let mut acc = 0.0;
                        for i in 0..rows {
                            acc += before[ai].value.as_slice()[i * cols + j] * g[i];
                        }
                        before[bi].grad[j] += acc;
                    }
                }
                (Shape::Matrix { rows: m, cols: k }, Shape::Matrix { cols: n, .. }) => {
                    for i in 0..m {
                        for l in 0..k {
                            let mut acc = 0.0;
                            for j in 0..n {
                                acc += g[i * n + j] * before[bi].value.as_slice()[l * n + j];
                            }
                            before[ai].grad[i * k + l] += acc;
                        }
                    }
                    for l in 0..k {
                        for j in 0..n {
                            let mut acc = 0.0;
                            for i in 0..m {
                                acc += before[ai].value.as_slice()[i * k + l] * g[i * n + j];
                            }
                            before[bi].grad[l * n + j] += acc;
                        }
                    }
                }
                _ => unreachable!("validated in forward"),
            }
        }
        Op::Add => {
            for i in 0..ins.len() {
                let input = ins.at(i);
                for (dg, &gv) in before[input.0].grad.iter_mut().zip(g.iter()) {
                    *dg += gv;
                }
            }
        }
        Op::Mul => {
            let (ai, bi) = (ins.at(0).0, ins.at(1).0);
            let sa = before[ai].value.shape();
            let sb = before[bi].value.shape();
            if sa == sb {
                for i in 0..g.len() {
                    let (av, bv) = (before[ai].value.as_slice()[i], before[bi].value.as_slice()[i]);
                    before[ai].grad[i] += g[i] * bv;
                    before[bi].grad[i] += g[i] * av;
                }
            } else if sa.is_scalar() {
                let s = before[ai].value.item();
                let mut acc = 0.0;
                for i in 0..g.len() {
                    acc += g[i] * before[bi].value.as_slice()[i];
                    before[bi].grad[i] += g[i] * s;
                }
                before[ai].grad[0] += acc;
            } else {
                let s = before[bi].value.item();
                let mut acc = 0.0;
                for i in 0..g.len() {
                    acc += g[i] * before[ai].value.as_slice()[i];
                    before[ai].grad[i] += g[i] * s;
                }
                before[bi].grad[0] += acc;
            }
        }
        Op::Scale(c) => {
            for (dg, &gv) in before[ins.at(0).0].grad.iter_mut().zip(g.iter()) {
                *dg += c * gv;
            }
        }
        Op::Concat => {
            let mut off = 0;
            for i in 0..ins.len() {
                let input = ins.at(i);
                let n = before[input.0].value.numel();
                for (dg, &gv) in before[input.0].grad.iter_mut().zip(&g[off..off + n]) {
                    *dg += gv;
                }
                off += n;
            }
        }
        Op::StackCols => {
            let k = ins.len();
            for j in 0..k {
                let input = ins.at(j);
                let d = before[input.0].value.numel();
                for i in 0..d {
                    before[input.0].grad[i] += g[i * k + j];
                }
            }
        }
        Op::LeakyRelu(slope) => {
            let xi = ins.at(0).0;
            for i in 0..g.len() {
                let f = if before[xi].value.as_slice()[i] >= 0.0 { 1.0 } else { *slope };
                before[xi].grad[i] += g[i] * f;
            }
        }
        Op::Sigmoid => {
            let xi = ins.at(0).0;
            let y = node.value.as_slice();
            for i in 0..g.len() {
                before[xi].grad[i] += g[i] * y[i] * (1.0 - y[i]);
            }
        }
        Op::Softmax => {
            let xi = ins.at(0).0;
            let y = node.value.as_slice();
            let dot: f64 = g.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
            for i in 0..g.len() {
                before[xi].grad[i] += y[i] * (g[i] - dot);
            }
        }
        Op::Ln => {
            let xi = ins.at(0).0;
            for i in 0..g.len() {
                let xv = before[xi].value.as_slice()[i];
                before[xi].grad[i] += g[i] / xv;
            }
        }
        Op::Sum => {
            let gv = g[0];
            for dg in before[ins.at(0).0].grad.iter_mut() {
                *dg += gv;
            }
        }
        Op::Mean => {
            let n = before[ins.at(0).0].value.numel() as f64;
            let gv = g[0] / n;
            for dg in before[ins.at(0).0].grad.iter_mut() {
                *dg += gv;
            }
        }
        Op::Dot => {
            let (ai, bi) = (ins.at(0).0, ins.at(1).0);
            let gv = g[0];
            for i in 0..before[ai].value.numel() {
                let (av, bv) = (before[ai].value.as_slice()[i], before[bi].value.as_slice()[i]);
                before[ai].grad[i] += gv * bv;
                before[bi].grad[i] += gv * av;
            }
        }
        Op::Gather(indices) => {
            let ti = ins.at(0).0;
            let cols = match before[ti].value.shape() {
                Shape::Matrix { cols, .. } => cols,
                _ => unreachable!(),
            };
            for (r, &idx) in indices.iter().enumerate() {
                for c in 0..cols {
                    before[ti].grad[idx * cols + c] += g[r * cols + c];
                }
            }
        }
        Op::GatherRow(index) => {
            let ti = ins.at(0).0;
            let cols = g.len();
            for c in 0..cols {
                before[ti].grad[index * cols + c] += g[c];
            }
        }
    }
}

/// Numerically stable scalar logistic, shared with the data generator and
/// oracle recomputations.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
