//! Wengert tape over matrix-valued nodes.
//!
//! Every operation appends a node holding its primal value. Parents always
//! precede children, so a single reverse sweep accumulates adjoints. Binary
//! elementwise ops broadcast axes of length one; the reverse sweep sums the
//! adjoint back down to each parent's shape.

use std::cell::{Cell, RefCell};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use super::matrix::{broadcast_shape, zip_broadcast, Matrix};
use super::AdError;

/// Operation kinds a node can carry.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Leaf,
    Constant,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    Offset(usize, f64),
    /// `a * w^T`.
    MatMulT(usize, usize),
    Tanh(usize),
    /// `max(x, 0)`. The derivative at exactly 0 is taken as 0.
    Relu(usize),
    /// Indicator of `x > 0`; its derivative is 0 everywhere.
    Step(usize),
    Sin(usize),
    Cos(usize),
    Exp(usize),
    Square(usize),
    Sum(usize),
    Mean(usize),
    Col(usize, usize),
    HCat(Vec<usize>),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Constant => "constant",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Neg(..) => "neg",
            Op::Scale(..) => "scale",
            Op::Offset(..) => "offset",
            Op::MatMulT(..) => "matmul_t",
            Op::Tanh(..) => "tanh",
            Op::Relu(..) => "relu",
            Op::Step(..) => "step",
            Op::Sin(..) => "sin",
            Op::Cos(..) => "cos",
            Op::Exp(..) => "exp",
            Op::Square(..) => "square",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::Col(..) => "col",
            Op::HCat(..) => "hcat",
        }
    }

    pub fn parents(&self) -> Vec<usize> {
        match self {
            Op::Leaf | Op::Constant => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) | Op::MatMulT(a, b) => {
                vec![*a, *b]
            }
            Op::Neg(a)
            | Op::Scale(a, _)
            | Op::Offset(a, _)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Step(a)
            | Op::Sin(a)
            | Op::Cos(a)
            | Op::Exp(a)
            | Op::Square(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::Col(a, _) => vec![*a],
            Op::HCat(parts) => parts.clone(),
        }
    }
}

/// Names accepted by [`Tape::apply`], with their arity.
pub const NAMED_OPS: &[(&str, usize)] = &[
    ("add", 2),
    ("sub", 2),
    ("mul", 2),
    ("div", 2),
    ("neg", 1),
    ("matmul_t", 2),
    ("tanh", 1),
    ("relu", 1),
    ("step", 1),
    ("sin", 1),
    ("cos", 1),
    ("exp", 1),
    ("square", 1),
    ("sum", 1),
    ("mean", 1),
];

#[derive(Debug, Clone)]
pub struct Node {
    pub op: Op,
    pub value: Matrix,
}

#[derive(Debug, Clone)]
struct LeafEntry {
    name: String,
    node: usize,
}

/// Records operations; read-only once construction is finished.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    leaves: RefCell<Vec<LeafEntry>>,
    first_non_finite: Cell<Option<usize>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("nodes", &self.nodes.borrow().len())
            .field("leaves", &self.leaves.borrow().len())
            .finish()
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{} {:?})", self.idx, self.shape())
    }
}

/// Adjoints of the seed node with respect to each registered leaf, in
/// registration order.
#[derive(Debug, Clone)]
pub struct Gradient {
    entries: Vec<(String, Matrix)>,
}

impl Gradient {
    pub fn get(&self, leaf: &str) -> Option<&Matrix> {
        self.entries
            .iter()
            .find(|(name, _)| name == leaf)
            .map(|(_, m)| m)
    }

    /// Gradient of a scalar leaf. Panics if the leaf is unknown or not `1 x 1`.
    pub fn scalar(&self, leaf: &str) -> f64 {
        self.get(leaf)
            .unwrap_or_else(|| panic!("no leaf named {leaf:?}"))
            .item()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn into_entries(self) -> Vec<(String, Matrix)> {
        self.entries
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Registers a differentiable input. Leaf names must be unique.
    pub fn leaf(&self, name: impl Into<String>, value: Matrix) -> Var<'_> {
        let name = name.into();
        assert!(
            self.leaves.borrow().iter().all(|l| l.name != name),
            "leaf {name:?} registered twice"
        );
        let idx = self.push(Op::Leaf, value);
        self.leaves.borrow_mut().push(LeafEntry { name, node: idx });
        Var { tape: self, idx }
    }

    pub fn scalar_leaf(&self, name: impl Into<String>, value: f64) -> Var<'_> {
        self.leaf(name, Matrix::scalar(value))
    }

    pub fn constant(&self, value: Matrix) -> Var<'_> {
        let idx = self.push(Op::Constant, value);
        Var { tape: self, idx }
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Matrix::scalar(value))
    }

    pub fn var(&self, idx: usize) -> Var<'_> {
        assert!(idx < self.len(), "node index {idx} out of range");
        Var { tape: self, idx }
    }

    pub fn leaf_names(&self) -> Vec<String> {
        self.leaves
            .borrow()
            .iter()
            .map(|l| l.name.clone())
            .collect()
    }

    /// Node index of a registered leaf.
    pub fn leaf_node(&self, name: &str) -> Option<usize> {
        self.leaves
            .borrow()
            .iter()
            .find(|l| l.name == name)
            .map(|l| l.node)
    }

    pub fn value(&self, idx: usize) -> Matrix {
        self.nodes.borrow()[idx].value.clone()
    }

    pub fn op(&self, idx: usize) -> Op {
        self.nodes.borrow()[idx].op.clone()
    }

    /// Index of the first node whose value contained NaN or infinity.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.first_non_finite.get()
    }

    /// Fails if any recorded value is non-finite.
    pub fn check_finite(&self) -> Result<(), AdError> {
        match self.first_non_finite.get() {
            Some(node) => {
                let op = self.nodes.borrow()[node].op.name();
                Err(AdError::NonFinite { node, op })
            }
            None => Ok(()),
        }
    }

    /// Applies an operation by name.
    pub fn apply<'t>(&'t self, op: &str, args: &[Var<'t>]) -> Result<Var<'t>, AdError> {
        let arity = NAMED_OPS
            .iter()
            .find(|(name, _)| *name == op)
            .map(|(_, n)| *n)
            .ok_or_else(|| AdError::UnsupportedOp(op.to_string()))?;
        if args.len() != arity {
            return Err(AdError::Arity {
                op: op.to_string(),
                expected: arity,
                got: args.len(),
            });
        }
        let shape_err = |a: &Var<'_>, b: &Var<'_>| AdError::Shape {
            op: op.to_string(),
            left: a.shape(),
            right: b.shape(),
        };
        if arity == 2 {
            let (a, b) = (&args[0], &args[1]);
            let ok = if op == "matmul_t" {
                a.shape().1 == b.shape().1
            } else {
                broadcast_shape(a.shape(), b.shape()).is_some()
            };
            if !ok {
                return Err(shape_err(a, b));
            }
        }
        let x = args[0];
        Ok(match op {
            "add" => x + args[1],
            "sub" => x - args[1],
            "mul" => x * args[1],
            "div" => x.div(args[1]),
            "neg" => -x,
            "matmul_t" => x.matmul_t(args[1]),
            "tanh" => x.tanh(),
            "relu" => x.relu(),
            "step" => x.step(),
            "sin" => x.sin(),
            "cos" => x.cos(),
            "exp" => x.exp(),
            "square" => x.square(),
            "sum" => x.sum(),
            "mean" => x.mean(),
            _ => unreachable!("named op table and dispatch disagree on {op}"),
        })
    }

    /// Horizontal concatenation of equally tall blocks.
    pub fn hcat<'t>(&'t self, parts: &[Var<'t>]) -> Var<'t> {
        assert!(!parts.is_empty(), "hcat of nothing");
        let idx = parts.iter().map(|p| p.idx).collect();
        self.push_op(Op::HCat(idx))
    }

    fn push(&self, op: Op, value: Matrix) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len();
        if self.first_non_finite.get().is_none() && !value.all_finite() {
            self.first_non_finite.set(Some(idx));
        }
        nodes.push(Node { op, value });
        idx
    }

    fn push_op(&self, op: Op) -> Var<'_> {
        let value = {
            let nodes = self.nodes.borrow();
            eval_op(&op, &nodes)
        };
        let idx = self.push(op, value);
        Var { tape: self, idx }
    }

    /// Recomputes every node from its parents, returning the fresh values.
    ///
    /// Leaves and constants are copied through.
    pub fn replay(&self) -> Vec<Matrix> {
        let nodes = self.nodes.borrow();
        let mut fresh: Vec<Node> = Vec::with_capacity(nodes.len());
        for node in nodes.iter() {
            let value = match node.op {
                Op::Leaf | Op::Constant => node.value.clone(),
                ref op => eval_op(op, &fresh),
            };
            fresh.push(Node {
                op: node.op.clone(),
                value,
            });
        }
        fresh.into_iter().map(|n| n.value).collect()
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, seed: usize) -> Result<Gradient, AdError> {
        self.check_finite()?;
        let nodes = self.nodes.borrow();
        let seed_node = nodes.get(seed).ok_or(AdError::NoSuchNode(seed))?;
        if !seed_node.value.is_scalar() {
            return Err(AdError::NotScalar {
                node: seed,
                shape: seed_node.value.shape(),
            });
        }
        let adjoints = reverse_sweep(&nodes, seed);
        let entries = self
            .leaves
            .borrow()
            .iter()
            .map(|leaf| {
                let shape = nodes[leaf.node].value.shape();
                let g = adjoints[leaf.node]
                    .clone()
                    .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1));
                (leaf.name.clone(), g)
            })
            .collect();
        Ok(Gradient { entries })
    }
}

fn accumulate(adjoints: &mut [Option<Matrix>], idx: usize, g: Matrix) {
    match &mut adjoints[idx] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn reverse_sweep(nodes: &[Node], seed: usize) -> Vec<Option<Matrix>> {
    let mut adjoints: Vec<Option<Matrix>> = vec![None; nodes.len()];
    adjoints[seed] = Some(Matrix::scalar(1.0));
    for i in (0..=seed).rev() {
        let Some(g) = adjoints[i].take() else {
            continue;
        };
        let val = |j: usize| &nodes[j].value;
        let shape = |j: usize| nodes[j].value.shape();
        match &nodes[i].op {
            Op::Leaf | Op::Constant => {
                adjoints[i] = Some(g);
                continue;
            }
            Op::Add(a, b) => {
                accumulate(&mut adjoints, *a, g.reduce_to(shape(*a)));
                accumulate(&mut adjoints, *b, g.reduce_to(shape(*b)));
            }
            Op::Sub(a, b) => {
                accumulate(&mut adjoints, *a, g.reduce_to(shape(*a)));
                accumulate(&mut adjoints, *b, g.map(|v| -v).reduce_to(shape(*b)));
            }
            Op::Mul(a, b) => {
                let ga = zip_broadcast(&g, val(*b), |x, y| x * y).reduce_to(shape(*a));
                let gb = zip_broadcast(&g, val(*a), |x, y| x * y).reduce_to(shape(*b));
                accumulate(&mut adjoints, *a, ga);
                accumulate(&mut adjoints, *b, gb);
            }
            Op::Div(a, b) => {
                let ga = zip_broadcast(&g, val(*b), |x, y| x / y).reduce_to(shape(*a));
                // d(a/b)/db = -(a/b)/b
                let q = zip_broadcast(&nodes[i].value, val(*b), |x, y| -x / y);
                let gb = zip_broadcast(&g, &q, |x, y| x * y).reduce_to(shape(*b));
                accumulate(&mut adjoints, *a, ga);
                accumulate(&mut adjoints, *b, gb);
            }
            Op::Neg(a) => accumulate(&mut adjoints, *a, g.map(|v| -v)),
            Op::Scale(a, c) => {
                let c = *c;
                accumulate(&mut adjoints, *a, g.map(|v| c * v));
            }
            Op::Offset(a, _) => accumulate(&mut adjoints, *a, g),
            Op::MatMulT(a, w) => {
                accumulate(&mut adjoints, *a, g.matmul(val(*w)));
                accumulate(&mut adjoints, *w, g.t_matmul(val(*a)));
            }
            Op::Tanh(a) => {
                let ga = zip_broadcast(&g, &nodes[i].value, |x, y| x * (1.0 - y * y));
                accumulate(&mut adjoints, *a, ga);
            }
            Op::Relu(a) => {
                let ga = zip_broadcast(&g, val(*a), |x, z| if z > 0.0 { x } else { 0.0 });
                accumulate(&mut adjoints, *a, ga);
            }
            Op::Step(_) => {}
            Op::Sin(a) => {
                let ga = zip_broadcast(&g, val(*a), |x, z| x * z.cos());
                accumulate(&mut adjoints, *a, ga);
            }
            Op::Cos(a) => {
                let ga = zip_broadcast(&g, val(*a), |x, z| -x * z.sin());
                accumulate(&mut adjoints, *a, ga);
            }
            Op::Exp(a) => {
                let ga = zip_broadcast(&g, &nodes[i].value, |x, y| x * y);
                accumulate(&mut adjoints, *a, ga);
            }
            Op::Square(a) => {
                let ga = zip_broadcast(&g, val(*a), |x, z| 2.0 * x * z);
                accumulate(&mut adjoints, *a, ga);
            }
            Op::Sum(a) => {
                let (r, c) = shape(*a);
                accumulate(&mut adjoints, *a, Matrix::filled(r, c, g.item()));
            }
            Op::Mean(a) => {
                let (r, c) = shape(*a);
                let n = (r * c) as f64;
                accumulate(&mut adjoints, *a, Matrix::filled(r, c, g.item() / n));
            }
            Op::Col(a, j) => {
                let (r, c) = shape(*a);
                let mut ga = Matrix::zeros(r, c);
                for row in 0..r {
                    ga.set(row, *j, g.get(row, 0));
                }
                accumulate(&mut adjoints, *a, ga);
            }
            Op::HCat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (r, c) = shape(p);
                    let gp = Matrix::from_fn(r, c, |row, col| g.get(row, offset + col));
                    offset += c;
                    accumulate(&mut adjoints, p, gp);
                }
            }
        }
    }
    adjoints
}

fn eval_op(op: &Op, nodes: &[Node]) -> Matrix {
    let v = |j: usize| &nodes[j].value;
    match op {
        Op::Leaf | Op::Constant => unreachable!("leaves carry their own values"),
        Op::Add(a, b) => zip_broadcast(v(*a), v(*b), |x, y| x + y),
        Op::Sub(a, b) => zip_broadcast(v(*a), v(*b), |x, y| x - y),
        Op::Mul(a, b) => zip_broadcast(v(*a), v(*b), |x, y| x * y),
        Op::Div(a, b) => zip_broadcast(v(*a), v(*b), |x, y| x / y),
        Op::Neg(a) => v(*a).map(|x| -x),
        Op::Scale(a, c) => {
            let c = *c;
            v(*a).map(|x| c * x)
        }
        Op::Offset(a, c) => {
            let c = *c;
            v(*a).map(|x| x + c)
        }
        Op::MatMulT(a, w) => v(*a).matmul_t(v(*w)),
        Op::Tanh(a) => v(*a).map(f64::tanh),
        Op::Relu(a) => v(*a).map(|x| if x > 0.0 { x } else { 0.0 }),
        Op::Step(a) => v(*a).map(|x| if x > 0.0 { 1.0 } else { 0.0 }),
        Op::Sin(a) => v(*a).map(f64::sin),
        Op::Cos(a) => v(*a).map(f64::cos),
        Op::Exp(a) => v(*a).map(f64::exp),
        Op::Square(a) => v(*a).map(|x| x * x),
        Op::Sum(a) => Matrix::scalar(v(*a).sum()),
        Op::Mean(a) => {
            let m = v(*a);
            Matrix::scalar(m.sum() / m.len() as f64)
        }
        Op::Col(a, j) => {
            let m = v(*a);
            assert!(
                *j < m.cols(),
                "column {j} out of range for {}x{}",
                m.rows(),
                m.cols()
            );
            Matrix::column(m.col_vec(*j))
        }
        Op::HCat(parts) => {
            let rows = v(parts[0]).rows();
            assert!(
                parts.iter().all(|&p| v(p).rows() == rows),
                "hcat blocks must share a row count"
            );
            let cols: usize = parts.iter().map(|&p| v(p).cols()).sum();
            let mut data = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for &p in parts {
                    data.extend_from_slice(v(p).row_slice(r));
                }
            }
            Matrix::from_vec(rows, cols, data)
        }
    }
}

impl<'t> Var<'t> {
    #[inline]
    pub fn index(&self) -> usize {
        self.idx
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Matrix {
        self.tape.value(self.idx)
    }

    /// Value of a `1 x 1` node.
    pub fn item(&self) -> f64 {
        self.tape.nodes.borrow()[self.idx].value.item()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.nodes.borrow()[self.idx].value.shape()
    }

    /// Gradient of this scalar node with respect to every leaf.
    pub fn backward(&self) -> Result<Gradient, AdError> {
        self.tape.backward(self.idx)
    }

    fn unary(self, op: Op) -> Self {
        self.tape.push_op(op)
    }

    fn binary(self, other: Self, op: Op) -> Self {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "operands recorded on different tapes"
        );
        if !matches!(op, Op::MatMulT(..)) {
            assert!(
                broadcast_shape(self.shape(), other.shape()).is_some(),
                "{}: cannot broadcast {:?} against {:?}",
                op.name(),
                self.shape(),
                other.shape()
            );
        }
        self.tape.push_op(op)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(self, other: Self) -> Self {
        self.binary(other, Op::Div(self.idx, other.idx))
    }

    pub fn scale(self, c: f64) -> Self {
        self.unary(Op::Scale(self.idx, c))
    }

    pub fn offset(self, c: f64) -> Self {
        self.unary(Op::Offset(self.idx, c))
    }

    /// `self * w^T`, e.g. a batch of row inputs through a weight matrix.
    pub fn matmul_t(self, w: Self) -> Self {
        self.binary(w, Op::MatMulT(self.idx, w.idx))
    }

    pub fn tanh(self) -> Self {
        self.unary(Op::Tanh(self.idx))
    }

    pub fn relu(self) -> Self {
        self.unary(Op::Relu(self.idx))
    }

    pub fn step(self) -> Self {
        self.unary(Op::Step(self.idx))
    }

    pub fn sin(self) -> Self {
        self.unary(Op::Sin(self.idx))
    }

    pub fn cos(self) -> Self {
        self.unary(Op::Cos(self.idx))
    }

    pub fn exp(self) -> Self {
        self.unary(Op::Exp(self.idx))
    }

    pub fn square(self) -> Self {
        self.unary(Op::Square(self.idx))
    }

    pub fn sum(self) -> Self {
        self.unary(Op::Sum(self.idx))
    }

    pub fn mean(self) -> Self {
        self.unary(Op::Mean(self.idx))
    }

    pub fn col(self, j: usize) -> Self {
        self.unary(Op::Col(self.idx, j))
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Add(self.idx, rhs.idx))
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Sub(self.idx, rhs.idx))
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Mul(self.idx, rhs.idx))
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.unary(Op::Neg(self.idx))
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Self {
        self.scale(c)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, v: Var<'t>) -> Var<'t> {
        v.scale(self)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Self {
        self.offset(c)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Self {
        self.offset(-c)
    }
}
