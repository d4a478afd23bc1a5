//! What the loss needs from a field approximator.
//!
//! Networks are the real implementation; [`AnalyticModel`] wraps the closed
//! forms so the loss can be checked against an exact solution.

use crate::analytic::AnalyticCase;
use crate::autodiff::{Dual, Gradient, Matrix, Tape, Var};
use crate::network::{NetworkParams, NetworkVars};
use crate::physics::Side;

/// A model recorded on one tape.
pub trait Recorded<'t> {
    /// Outputs for `input` (`n x input_dim`), `n x field_count`.
    fn forward(&self, input: Var<'t>) -> Var<'t>;

    /// Outputs plus their derivatives along each input axis in `directions`.
    fn forward_with_tangents(
        &self,
        input: Var<'t>,
        directions: &[usize],
    ) -> (Var<'t>, Vec<Var<'t>>);

    /// Gradient with respect to this model's parameters, flattened.
    fn gradient(&self, grad: &Gradient) -> Vec<f64>;
}

pub trait FieldModel: Sync {
    fn num_params(&self) -> usize;

    /// Registers the parameters on `tape` under `prefix`.
    fn record<'s, 't: 's>(&'s self, tape: &'t Tape, prefix: &str) -> Box<dyn Recorded<'t> + 's>;

    /// Plain evaluation, `n x input_dim` to `n x field_count`.
    fn evaluate(&self, input: &Matrix) -> Matrix;
}

impl<'t> Recorded<'t> for NetworkVars<'t, '_> {
    fn forward(&self, input: Var<'t>) -> Var<'t> {
        NetworkVars::forward(self, input)
    }

    fn forward_with_tangents(
        &self,
        input: Var<'t>,
        directions: &[usize],
    ) -> (Var<'t>, Vec<Var<'t>>) {
        NetworkVars::forward_with_tangents(self, input, directions)
    }

    fn gradient(&self, grad: &Gradient) -> Vec<f64> {
        self.flat_gradient(grad)
    }
}

impl FieldModel for NetworkParams {
    fn num_params(&self) -> usize {
        NetworkParams::num_params(self)
    }

    fn record<'s, 't: 's>(&'s self, tape: &'t Tape, prefix: &str) -> Box<dyn Recorded<'t> + 's> {
        Box::new(self.register(tape, prefix))
    }

    fn evaluate(&self, input: &Matrix) -> Matrix {
        self.forward_batch(input)
            .expect("input width checked by the caller")
    }
}

/// The exact solution of a benchmark case, with no parameters.
///
/// `side = None` evaluates piecewise at the true interface; `Some(side)`
/// extends one medium's formula over the whole box.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticModel {
    pub case: AnalyticCase,
    pub side: Option<Side>,
}

impl AnalyticModel {
    pub fn new(case: AnalyticCase, side: Option<Side>) -> Self {
        Self { case, side }
    }
}

struct AnalyticRecorded<'t> {
    model: AnalyticModel,
    tape: &'t Tape,
}

impl<'t> AnalyticRecorded<'t> {
    fn fields(&self, coords: &[Dual<'t>], x: &Matrix) -> Vec<Dual<'t>> {
        match self.model.side {
            Some(side) => self.model.case.fields_on(side, coords),
            None => {
                let d = self.model.case.true_params().d;
                let mask = x.map(|v| if v <= d { 1.0 } else { 0.0 });
                let left = self.tape.constant(mask.clone());
                let right = self.tape.constant(mask.map(|m| 1.0 - m));
                let f1 = self.model.case.fields_on(Side::One, coords);
                let f2 = self.model.case.fields_on(Side::Two, coords);
                f1.into_iter()
                    .zip(f2)
                    .map(|(a, b)| a * Dual::constant(left) + b * Dual::constant(right))
                    .collect()
            }
        }
    }

    fn run(&self, input: Var<'t>, direction: Option<usize>) -> (Var<'t>, Option<Var<'t>>) {
        let dim = input.shape().1;
        let coords: Vec<Dual<'t>> = (0..dim)
            .map(|j| {
                let c = input.col(j);
                if Some(j) == direction {
                    Dual::seeded(c)
                } else {
                    Dual::constant(c)
                }
            })
            .collect();
        let x = input.value();
        let x = Matrix::column(x.col_vec(1));
        let fields = self.fields(&coords, &x);
        let value = self
            .tape
            .hcat(&fields.iter().map(|f| f.value).collect::<Vec<_>>());
        let tangent = direction.map(|_| {
            self.tape.hcat(
                &fields
                    .iter()
                    .map(|f| f.tangent_or_zero())
                    .collect::<Vec<_>>(),
            )
        });
        (value, tangent)
    }
}

impl<'t> Recorded<'t> for AnalyticRecorded<'t> {
    fn forward(&self, input: Var<'t>) -> Var<'t> {
        self.run(input, None).0
    }

    fn forward_with_tangents(
        &self,
        input: Var<'t>,
        directions: &[usize],
    ) -> (Var<'t>, Vec<Var<'t>>) {
        let value = self.forward(input);
        let tangents = directions
            .iter()
            .map(|&d| self.run(input, Some(d)).1.expect("seeded direction"))
            .collect();
        (value, tangents)
    }

    fn gradient(&self, _grad: &Gradient) -> Vec<f64> {
        Vec::new()
    }
}

impl FieldModel for AnalyticModel {
    fn num_params(&self) -> usize {
        0
    }

    fn record<'s, 't: 's>(&'s self, tape: &'t Tape, _prefix: &str) -> Box<dyn Recorded<'t> + 's> {
        Box::new(AnalyticRecorded { model: *self, tape })
    }

    fn evaluate(&self, input: &Matrix) -> Matrix {
        let d = self.case.true_params().d;
        let rows: Vec<f64> = (0..input.rows())
            .flat_map(|r| {
                let p = input.row_slice(r);
                let side = self.side.unwrap_or_else(|| Side::of(p[1], d));
                self.case.fields_on(side, p)
            })
            .collect();
        let m = self.case.dim().field_count();
        Matrix::from_vec(input.rows(), m, rows)
    }
}
