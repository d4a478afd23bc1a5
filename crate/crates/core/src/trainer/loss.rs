//! Data, physics and interface losses with their gradient.
//!
//! Every point set is cut into fixed-size chunks. Each chunk is recorded on
//! its own tape and differentiated independently; the chunks are evaluated as
//! a parallel map and summed in chunk order, so the result does not depend on
//! the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::FieldModel;
use super::TrainError;
use crate::analytic::DataPoint;
use crate::autodiff::{Matrix, Tape, Var};
use crate::physics::{
    interface_jump, residual_1d, residual_2d, CaseGeometry, Derivs1d, Derivs2d, Dimension,
    MaterialParams,
};
use crate::sampler::{CollocationSet, Region, SampleBatch};

/// Points per tape.
pub const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub w_d: f64,
    pub w_p: f64,
    pub w_i: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_d: 1.0,
            w_p: 1.0,
            w_i: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub loss_d: f64,
    pub loss_p: f64,
    pub loss_i: f64,
    pub total: f64,
}

impl LossParts {
    pub fn new(loss_d: f64, loss_p: f64, loss_i: f64, w: &LossWeights) -> Self {
        Self {
            loss_d,
            loss_p,
            loss_i,
            total: w.w_d * loss_d + w.w_p * loss_p + w.w_i * loss_i,
        }
    }
}

/// Loss value and gradient.
///
/// The gradient is laid out `[theta1 | theta2 | lambda]` for two networks and
/// `[theta | lambda]` for one, with `lambda = [mu1, eps1, mu2, eps2, d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub parts: LossParts,
    pub gradient: Vec<f64>,
    pub empty_d1: bool,
    pub empty_d2: bool,
}

/// The approximators entering the loss.
#[derive(Clone, Copy)]
pub enum Models<'m> {
    /// One network per medium, with the interface loss.
    Split(&'m dyn FieldModel, &'m dyn FieldModel),
    /// A single network over the whole box with piecewise materials.
    Single(&'m dyn FieldModel),
}

impl<'m> Models<'m> {
    fn nets(&self) -> Vec<&'m dyn FieldModel> {
        match *self {
            Models::Split(a, b) => vec![a, b],
            Models::Single(a) => vec![a],
        }
    }

    pub fn num_params(&self) -> usize {
        self.nets().iter().map(|n| n.num_params()).sum::<usize>() + 5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Component {
    Data,
    Physics,
    Interface,
}

enum Job<'b> {
    Data {
        net: usize,
        points: &'b [&'b DataPoint],
        norm: f64,
    },
    Physics {
        net: usize,
        set: CollocationSet,
        norm: f64,
    },
    Interface {
        set: CollocationSet,
        norm: f64,
    },
}

impl Job<'_> {
    fn component(&self) -> Component {
        match self {
            Job::Data { .. } => Component::Data,
            Job::Physics { .. } => Component::Physics,
            Job::Interface { .. } => Component::Interface,
        }
    }

    fn nets(&self) -> Vec<usize> {
        match self {
            Job::Data { net, .. } | Job::Physics { net, .. } => vec![*net],
            Job::Interface { .. } => vec![0, 1],
        }
    }
}

fn chunked_sets(set: &CollocationSet) -> Vec<CollocationSet> {
    (0..set.len())
        .step_by(CHUNK)
        .map(|s| set.slice(s..(s + CHUNK).min(set.len())))
        .collect()
}

fn jobs<'b>(models: &Models<'_>, batch: &'b SampleBatch<'_>) -> Vec<Job<'b>> {
    let mut out = Vec::new();
    let data: Vec<&'b [&'b DataPoint]> = match models {
        Models::Split(..) => vec![&batch.data1, &batch.data2],
        Models::Single(_) => vec![&batch.data1],
    };
    for (net, points) in data.into_iter().enumerate() {
        let norm = points.len() as f64;
        for c in points.chunks(CHUNK) {
            out.push(Job::Data {
                net,
                points: c,
                norm,
            });
        }
    }
    let physics: Vec<(usize, &CollocationSet)> = match models {
        Models::Split(..) => vec![(0, &batch.p1), (1, &batch.p2)],
        Models::Single(_) => vec![(0, &batch.p1)],
    };
    for (net, set) in physics {
        let norm = set.len() as f64;
        for c in chunked_sets(set) {
            out.push(Job::Physics { net, set: c, norm });
        }
    }
    if let Models::Split(..) = models {
        let norm = batch.interface.len() as f64;
        for c in chunked_sets(&batch.interface) {
            out.push(Job::Interface { set: c, norm });
        }
    }
    out
}

/// Input matrix `(t, x[, y])` with `x` recorded as a function of the `d` leaf.
fn collocation_input<'t>(
    tape: &'t Tape,
    set: &CollocationSet,
    d: Var<'t>,
    x_max: f64,
) -> (Var<'t>, Matrix) {
    let n = set.len();
    let t = tape.constant(Matrix::column(set.t.clone()));
    let (a, b): (Vec<f64>, Vec<f64>) = set
        .nu
        .iter()
        .map(|&nu| set.region.x_coefficients(nu, x_max))
        .unzip();
    let d_value = d.item();
    let x_value = Matrix::column(set.x(d_value, x_max));
    let x = match set.region {
        Region::Whole => tape.constant(x_value.clone()),
        Region::Interface => tape.constant(Matrix::zeros(n, 1)) + d,
        _ => tape.constant(Matrix::column(a)) + tape.constant(Matrix::column(b)) * d,
    };
    let mut cols = vec![t, x];
    if !set.y.is_empty() {
        cols.push(tape.constant(Matrix::column(set.y.clone())));
    }
    (tape.hcat(&cols), x_value)
}

struct ChunkResult {
    component: Component,
    value: f64,
    gradient: Vec<f64>,
}

struct Context<'a> {
    models: Models<'a>,
    lambda: MaterialParams,
    geometry: CaseGeometry,
    weights: LossWeights,
    offsets: Vec<usize>,
    total_params: usize,
}

impl Context<'_> {
    fn run(&self, job: &Job<'_>) -> Result<ChunkResult, TrainError> {
        let tape = Tape::new();
        let lam: Vec<Var<'_>> = MaterialParams::NAMES
            .iter()
            .zip(self.lambda.to_array())
            .map(|(n, v)| tape.scalar_leaf(*n, v))
            .collect();
        let nets = self.models.nets();
        let used = job.nets();
        let recorded: Vec<_> = used
            .iter()
            .map(|&i| nets[i].record(&tape, &format!("net{}", i + 1)))
            .collect();
        let dim = self.geometry.dim;
        let (partial, weight) = match job {
            Job::Data { points, norm, .. } => {
                let nc = dim.input_dim();
                let nf = dim.field_count();
                let input = Matrix::from_fn(points.len(), nc, |r, c| points[r].coords[c]);
                let target = Matrix::from_fn(points.len(), nf, |r, c| points[r].fields[c]);
                let out = recorded[0].forward(tape.constant(input));
                let misfit = (out - tape.constant(target)).square().sum();
                (misfit.scale(1.0 / norm), self.weights.w_d)
            }
            Job::Physics { net, set, norm } => {
                let (input, x) = collocation_input(&tape, set, lam[4], self.geometry.x_max);
                let (mu, eps) = match self.models {
                    Models::Split(..) => (lam[2 * net], lam[2 * net + 1]),
                    Models::Single(_) => {
                        let d = self.lambda.d;
                        let mask = x.map(|v| if v <= d { 1.0 } else { 0.0 });
                        let left = tape.constant(mask.clone());
                        let right = tape.constant(mask.map(|m| 1.0 - m));
                        (
                            left * lam[0] + right * lam[2],
                            left * lam[1] + right * lam[3],
                        )
                    }
                };
                let dirs: Vec<usize> = (0..dim.input_dim()).collect();
                let (_, tan) = recorded[0].forward_with_tangents(input, &dirs);
                let sq = match dim {
                    Dimension::One => {
                        let d = Derivs1d {
                            ey_t: tan[0].col(0),
                            hz_t: tan[0].col(1),
                            ey_x: tan[1].col(0),
                            hz_x: tan[1].col(1),
                        };
                        residual_1d(&d, mu, eps).squared_norm()
                    }
                    Dimension::Two => {
                        let d = Derivs2d {
                            ex_t: tan[0].col(0),
                            ey_t: tan[0].col(1),
                            hz_t: tan[0].col(2),
                            ey_x: tan[1].col(1),
                            hz_x: tan[1].col(2),
                            ex_y: tan[2].col(0),
                            hz_y: tan[2].col(2),
                        };
                        residual_2d(&d, mu, eps).squared_norm()
                    }
                };
                (sq.sum().scale(1.0 / norm), self.weights.w_p)
            }
            Job::Interface { set, norm } => {
                let (input, _) = collocation_input(&tape, set, lam[4], self.geometry.x_max);
                let o1 = recorded[0].forward(input);
                let o2 = recorded[1].forward(input);
                let nf = dim.field_count();
                let f1: Vec<Var<'_>> = (0..nf).map(|j| o1.col(j)).collect();
                let f2: Vec<Var<'_>> = (0..nf).map(|j| o2.col(j)).collect();
                let s = interface_jump(&f1, &f2, lam[1], lam[3], dim)
                    .map_err(|e| TrainError::Config(e.to_string()))?;
                (s.square().sum().scale(1.0 / norm), self.weights.w_i)
            }
        };
        let weighted = partial.scale(weight);
        if let Err(e) = tape.check_finite() {
            return Err(TrainError::NonFiniteLoss(e.to_string()));
        }
        let grad = weighted
            .backward()
            .map_err(|e| TrainError::NonFiniteLoss(e.to_string()))?;
        let mut gradient = vec![0.0; self.total_params];
        for (rec, &i) in recorded.iter().zip(&used) {
            let g = rec.gradient(&grad);
            gradient[self.offsets[i]..self.offsets[i] + g.len()].copy_from_slice(&g);
        }
        let lo = self.total_params - 5;
        for (k, n) in MaterialParams::NAMES.iter().enumerate() {
            gradient[lo + k] = grad.scalar(n);
        }
        Ok(ChunkResult {
            component: job.component(),
            value: partial.item(),
            gradient,
        })
    }
}

/// Composite loss and its gradient with respect to all network parameters
/// and `lambda`.
///
/// `lambda.d` places the collocation and interface points; the data split is
/// taken from `batch` as is.
pub fn composite_loss(
    models: Models<'_>,
    lambda: &MaterialParams,
    batch: &SampleBatch<'_>,
    geometry: &CaseGeometry,
    weights: &LossWeights,
) -> Result<LossEval, TrainError> {
    if let Models::Split(..) = models {
        if batch.interface.is_empty() {
            return Err(TrainError::Config(
                "the interface collocation set is empty".into(),
            ));
        }
    }
    let nets = models.nets();
    let mut offsets = Vec::with_capacity(nets.len());
    let mut acc = 0;
    for n in &nets {
        offsets.push(acc);
        acc += n.num_params();
    }
    let ctx = Context {
        models,
        lambda: *lambda,
        geometry: *geometry,
        weights: *weights,
        offsets,
        total_params: acc + 5,
    };
    let jobs = jobs(&models, batch);
    let results: Vec<Result<ChunkResult, TrainError>> =
        jobs.par_iter().map(|j| ctx.run(j)).collect();
    let (mut ld, mut lp, mut li) = (0.0, 0.0, 0.0);
    let mut gradient = vec![0.0; ctx.total_params];
    for r in results {
        let r = r?;
        match r.component {
            Component::Data => ld += r.value,
            Component::Physics => lp += r.value,
            Component::Interface => li += r.value,
        }
        for (g, v) in gradient.iter_mut().zip(&r.gradient) {
            *g += v;
        }
    }
    let split = matches!(models, Models::Split(..));
    Ok(LossEval {
        parts: LossParts::new(ld, lp, li, weights),
        gradient,
        empty_d1: batch.data1.is_empty(),
        empty_d2: split && batch.data2.is_empty(),
    })
}
