//! Reverse-mode differentiation over matrix-valued nodes, with forward
//! tangents recorded as ordinary operations so the two modes nest.
//!
//! All arithmetic is `f64`.

mod check;
mod matrix;
mod tangent;
mod tape;

use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

pub use check::{
    central_difference, check_gradient, compare_gradients, GradCheckConfig, GradCheckEntry,
    GradCheckReport,
};
pub use matrix::{broadcast_shape, zip_broadcast, Matrix};
pub use tangent::{axis_of, forward_tangent, forward_tangent_on, record, Dual, Program, Recording};
pub use tape::{Gradient, Node, Op, Tape, Var, NAMED_OPS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    #[error("unsupported operation `{0}`")]
    UnsupportedOp(String),
    #[error("`{op}` expects {expected} operand(s), got {got}")]
    Arity {
        op: String,
        expected: usize,
        got: usize,
    },
    #[error("`{op}`: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: String,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("non-finite value produced at node {node} (`{op}`)")]
    NonFinite { node: usize, op: &'static str },
    #[error("seed node {node} has shape {shape:?}; backward needs a scalar")]
    NotScalar { node: usize, shape: (usize, usize) },
    #[error("no node with index {0}")]
    NoSuchNode(usize),
    #[error("direction {0:?} is not a unit coordinate vector")]
    UnsupportedDirection(Vec<f64>),
}

/// Arithmetic shared by plain numbers and recorded nodes.
///
/// Residual and loss formulas are written once against this trait and run
/// either on `f64` or on the tape.
pub trait Real:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn square(self) -> Self;
    fn scale(self, c: f64) -> Self;
}

impl Real for f64 {
    fn square(self) -> Self {
        self * self
    }
    fn scale(self, c: f64) -> Self {
        c * self
    }
}

/// Pointwise elementary functions, shared by numbers and nodes.
pub trait Elementary: Real {
    fn offset(self, c: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn tanh(self) -> Self;
}

impl Elementary for f64 {
    fn offset(self, c: f64) -> Self {
        self + c
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
}

/// The full recordable operation set.
pub trait Expr: Elementary {
    fn div(self, rhs: Self) -> Self;
    fn matmul_t(self, w: Self) -> Self;
    fn relu(self) -> Self;
    fn step(self) -> Self;
    fn sum(self) -> Self;
    fn mean(self) -> Self;
    fn col(self, j: usize) -> Self;
}

impl Real for Var<'_> {
    fn square(self) -> Self {
        Var::square(self)
    }
    fn scale(self, c: f64) -> Self {
        Var::scale(self, c)
    }
}

impl Elementary for Var<'_> {
    fn offset(self, c: f64) -> Self {
        Var::offset(self, c)
    }
    fn sin(self) -> Self {
        Var::sin(self)
    }
    fn cos(self) -> Self {
        Var::cos(self)
    }
    fn exp(self) -> Self {
        Var::exp(self)
    }
    fn tanh(self) -> Self {
        Var::tanh(self)
    }
}

impl Expr for Var<'_> {
    fn div(self, rhs: Self) -> Self {
        Var::div(self, rhs)
    }
    fn matmul_t(self, w: Self) -> Self {
        Var::matmul_t(self, w)
    }
    fn relu(self) -> Self {
        Var::relu(self)
    }
    fn step(self) -> Self {
        Var::step(self)
    }
    fn sum(self) -> Self {
        Var::sum(self)
    }
    fn mean(self) -> Self {
        Var::mean(self)
    }
    fn col(self, j: usize) -> Self {
        Var::col(self, j)
    }
}
