//! Forward tangents expressed as tape operations.
//!
//! A [`Dual`] pairs a primal node with an optional tangent node. Both are
//! recorded on the same tape, so a reverse sweep seeded at a tangent yields
//! mixed second derivatives such as `d/dθ (du/dx)`.

use std::ops::{Add, Mul, Neg, Sub};

use super::matrix::Matrix;
use super::tape::{Tape, Var};
use super::{AdError, Elementary, Expr, Real};

/// Primal node plus directional derivative. `tangent == None` means zero.
#[derive(Debug, Clone, Copy)]
pub struct Dual<'t> {
    pub value: Var<'t>,
    pub tangent: Option<Var<'t>>,
}

impl<'t> Dual<'t> {
    pub fn constant(value: Var<'t>) -> Self {
        Self {
            value,
            tangent: None,
        }
    }

    /// Seeds the tangent with ones of the value's shape.
    pub fn seeded(value: Var<'t>) -> Self {
        let (r, c) = value.shape();
        let one = value.tape().constant(Matrix::filled(r, c, 1.0));
        Self {
            value,
            tangent: Some(one),
        }
    }

    /// Tangent node, materialising zeros when the tangent is structurally zero.
    pub fn tangent_or_zero(&self) -> Var<'t> {
        self.tangent.unwrap_or_else(|| {
            let (r, c) = self.value.shape();
            self.value.tape().constant(Matrix::zeros(r, c))
        })
    }

    fn map_tangent(self, value: Var<'t>, f: impl FnOnce(Var<'t>) -> Var<'t>) -> Self {
        Self {
            value,
            tangent: self.tangent.map(f),
        }
    }
}

fn add_opt<'t>(a: Option<Var<'t>>, b: Option<Var<'t>>) -> Option<Var<'t>> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a + b),
        (a, None) => a,
        (None, b) => b,
    }
}

impl<'t> Add for Dual<'t> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            value: self.value + rhs.value,
            tangent: add_opt(self.tangent, rhs.tangent),
        }
    }
}

impl<'t> Sub for Dual<'t> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self {
            value: self.value - rhs.value,
            tangent: add_opt(self.tangent, rhs.tangent.map(|t| -t)),
        }
    }
}

impl<'t> Mul for Dual<'t> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self {
            value: self.value * rhs.value,
            tangent: add_opt(
                self.tangent.map(|t| t * rhs.value),
                rhs.tangent.map(|t| self.value * t),
            ),
        }
    }
}

impl<'t> Neg for Dual<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map_tangent(-self.value, |t| -t)
    }
}

impl Real for Dual<'_> {
    fn square(self) -> Self {
        let v = self.value;
        self.map_tangent(v.square(), |t| (v * t).scale(2.0))
    }

    fn scale(self, c: f64) -> Self {
        self.map_tangent(self.value.scale(c), |t| t.scale(c))
    }
}

impl Elementary for Dual<'_> {
    fn offset(self, c: f64) -> Self {
        Self {
            value: self.value.offset(c),
            tangent: self.tangent,
        }
    }

    fn sin(self) -> Self {
        let c = self.value.cos();
        self.map_tangent(self.value.sin(), |t| t * c)
    }

    fn cos(self) -> Self {
        let s = self.value.sin();
        self.map_tangent(self.value.cos(), |t| -(t * s))
    }

    fn exp(self) -> Self {
        let y = self.value.exp();
        self.map_tangent(y, |t| t * y)
    }

    fn tanh(self) -> Self {
        let y = self.value.tanh();
        // (1 - y^2) t
        self.map_tangent(y, |t| t - t * y.square())
    }
}

impl Expr for Dual<'_> {
    fn div(self, rhs: Self) -> Self {
        let q = self.value.div(rhs.value);
        // (a/b)' = (a' - q b') / b
        let num = add_opt(self.tangent, rhs.tangent.map(|t| -(q * t)));
        Self {
            value: q,
            tangent: num.map(|n| n.div(rhs.value)),
        }
    }

    fn matmul_t(self, w: Self) -> Self {
        Self {
            value: self.value.matmul_t(w.value),
            tangent: add_opt(
                self.tangent.map(|t| t.matmul_t(w.value)),
                w.tangent.map(|t| self.value.matmul_t(t)),
            ),
        }
    }

    fn relu(self) -> Self {
        let mask = self.value.step();
        self.map_tangent(self.value.relu(), |t| t * mask)
    }

    fn step(self) -> Self {
        Self::constant(self.value.step())
    }

    fn sum(self) -> Self {
        self.map_tangent(self.value.sum(), |t| t.sum())
    }

    fn mean(self) -> Self {
        self.map_tangent(self.value.mean(), |t| t.mean())
    }

    fn col(self, j: usize) -> Self {
        self.map_tangent(self.value.col(j), |t| t.col(j))
    }
}

/// A differentiable program over named leaves.
///
/// `eval` is generic so one definition can be recorded plainly or with
/// forward tangents.
pub trait Program {
    fn leaf_names(&self) -> Vec<String>;

    fn eval<E: Expr>(&self, leaves: &[E]) -> E;
}

/// Output of [`record`]: the tape plus the index of the program's result.
#[derive(Debug)]
pub struct Recording {
    pub tape: Tape,
    pub output: usize,
}

impl Recording {
    pub fn value(&self) -> Matrix {
        self.tape.value(self.output)
    }
}

fn check_point<P: Program>(program: &P, point: &[f64]) -> Result<Vec<String>, AdError> {
    let names = program.leaf_names();
    if names.len() != point.len() {
        return Err(AdError::Arity {
            op: "program".to_string(),
            expected: names.len(),
            got: point.len(),
        });
    }
    Ok(names)
}

/// Records `program` at `point` (one scalar per leaf).
pub fn record<P: Program>(program: &P, point: &[f64]) -> Result<Recording, AdError> {
    let names = check_point(program, point)?;
    let tape = Tape::new();
    let output = {
        let leaves: Vec<Var<'_>> = names
            .iter()
            .zip(point)
            .map(|(n, &v)| tape.scalar_leaf(n.clone(), v))
            .collect();
        program.eval(&leaves).index()
    };
    tape.check_finite()?;
    Ok(Recording { tape, output })
}

/// Index of the coordinate axis `direction` points along.
pub fn axis_of(direction: &[f64]) -> Result<usize, AdError> {
    let mut axis = None;
    for (i, &d) in direction.iter().enumerate() {
        if d == 1.0 && axis.is_none() {
            axis = Some(i);
        } else if d != 0.0 {
            return Err(AdError::UnsupportedDirection(direction.to_vec()));
        }
    }
    axis.ok_or_else(|| AdError::UnsupportedDirection(direction.to_vec()))
}

/// Records `program` on `tape` with the tangent seeded along `direction`.
///
/// The returned tangent node is an ordinary tape node; seeding a reverse
/// sweep there differentiates the directional derivative once more.
pub fn forward_tangent_on<'t, P: Program>(
    tape: &'t Tape,
    program: &P,
    point: &[f64],
    direction: &[f64],
) -> Result<Dual<'t>, AdError> {
    let names = check_point(program, point)?;
    let axis = axis_of(direction)?;
    if direction.len() != point.len() {
        return Err(AdError::UnsupportedDirection(direction.to_vec()));
    }
    let leaves: Vec<Dual<'t>> = names
        .iter()
        .zip(point)
        .enumerate()
        .map(|(i, (n, &v))| {
            let leaf = tape.scalar_leaf(n.clone(), v);
            if i == axis {
                Dual::seeded(leaf)
            } else {
                Dual::constant(leaf)
            }
        })
        .collect();
    let out = program.eval(&leaves);
    tape.check_finite()?;
    Ok(out)
}

/// Value and directional derivative of a scalar program along a coordinate axis.
pub fn forward_tangent<P: Program>(
    program: &P,
    point: &[f64],
    direction: &[f64],
) -> Result<(f64, f64), AdError> {
    let tape = Tape::new();
    let out = forward_tangent_on(&tape, program, point, direction)?;
    let derivative = out.tangent.map_or(0.0, |t| t.item());
    Ok((out.value.item(), derivative))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct SinTimesX;
    impl Program for SinTimesX {
        fn leaf_names(&self) -> Vec<String> {
            vec!["t".into(), "x".into()]
        }
        fn eval<E: Expr>(&self, v: &[E]) -> E {
            v[0].sin() * v[1]
        }
    }

    struct XSquared;
    impl Program for XSquared {
        fn leaf_names(&self) -> Vec<String> {
            vec!["t".into(), "x".into()]
        }
        fn eval<E: Expr>(&self, v: &[E]) -> E {
            v[1].square()
        }
    }

    struct Bilinear;
    impl Program for Bilinear {
        fn leaf_names(&self) -> Vec<String> {
            vec!["x".into(), "w".into()]
        }
        fn eval<E: Expr>(&self, v: &[E]) -> E {
            v[1] * v[0]
        }
    }

    #[test]
    fn product_rule_along_t() {
        let (v, d) = forward_tangent(&SinTimesX, &[0.0, 7.0], &[1.0, 0.0]).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(d, 7.0);
    }

    #[test]
    fn square_along_x() {
        let (v, d) = forward_tangent(&XSquared, &[0.4, 3.0], &[0.0, 1.0]).unwrap();
        assert_eq!(v, 9.0);
        assert_eq!(d, 6.0);
    }

    #[test]
    fn nested_derivative_of_bilinear_form() {
        for &(x, w) in &[(2.0, 5.0), (-1.5, 0.25), (0.0, 0.0)] {
            let tape = Tape::new();
            let out = forward_tangent_on(&tape, &Bilinear, &[x, w], &[1.0, 0.0]).unwrap();
            let dudx = out.tangent.unwrap();
            assert_eq!(dudx.item(), w);
            let g = dudx.backward().unwrap();
            assert_eq!(g.scalar("w"), 1.0);
            assert_eq!(g.scalar("x"), 0.0);
        }
    }

    #[test]
    fn direction_must_be_a_coordinate_axis() {
        for dir in [&[0.5, 0.5][..], &[0.0, 0.0], &[1.0, 1.0], &[0.0, 2.0]] {
            assert!(matches!(
                forward_tangent(&Bilinear, &[1.0, 1.0], dir),
                Err(AdError::UnsupportedDirection(_))
            ));
        }
    }

    #[test]
    fn record_evaluates_program() {
        let rec = record(&Bilinear, &[2.0, 5.0]).unwrap();
        assert_eq!(rec.value().item(), 10.0);
        assert!(matches!(
            record(&Bilinear, &[1.0]),
            Err(AdError::Arity { .. })
        ));
    }
}
