//! Fully-connected sub-networks mapping `(t, x[, y])` to field components.
//!
//! Hidden layers use one activation; the output layer is affine. Input
//! Jacobians are propagated layer by layer as forward tangents
//! (`J <- diag(σ'(z)) W J`) using recordable operations, so a loss built
//! from them can be differentiated again with respect to the weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{zip_broadcast, Gradient, Matrix, Tape, Var};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("network needs at least one hidden layer (got sizes {0:?})")]
    TooFewLayers(Vec<usize>),
    #[error("layer {layer} has zero width")]
    ZeroWidth { layer: usize },
    #[error("expected input of dimension {expected}, got {got}")]
    InputDim { expected: usize, got: usize },
    #[error("direction {direction} out of range for input dimension {dim}")]
    Direction { direction: usize, dim: usize },
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    fn apply(self, z: &Matrix) -> Matrix {
        match self {
            Activation::Relu => z.map(|v| if v > 0.0 { v } else { 0.0 }),
            Activation::Tanh => z.map(f64::tanh),
        }
    }

    /// Tangent through the activation, mirroring the recorded form exactly.
    fn tangent(self, z: &Matrix, a: &Matrix, t: &Matrix) -> Matrix {
        match self {
            Activation::Relu => {
                let mask = z.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                zip_broadcast(t, &mask, |x, m| x * m)
            }
            Activation::Tanh => {
                let a2 = a.map(|v| v * v);
                let ta2 = zip_broadcast(t, &a2, |x, y| x * y);
                zip_broadcast(t, &ta2, |x, y| x - y)
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(format!(
                "unknown activation {other:?} (expected relu or tanh)"
            )),
        }
    }
}

/// Per-axis affine map of `[lower, upper]` onto `[-1, 1]`, applied before
/// the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl InputScaling {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert!(
            lower.iter().zip(&upper).all(|(l, u)| u > l),
            "empty scaling range"
        );
        Self { lower, upper }
    }

    fn scale(&self) -> Matrix {
        Matrix::row(
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| 2.0 / (u - l))
                .collect(),
        )
    }

    fn shift(&self) -> Matrix {
        Matrix::row(
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| -(u + l) / (u - l))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out x in`.
    pub weight: Matrix,
    /// `1 x out`.
    pub bias: Matrix,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// Weights, biases and activation of one sub-network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    layers: Vec<Layer>,
    activation: Activation,
    scaling: Option<InputScaling>,
}

/// Network outputs at one point, in the case's field order.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector(pub Vec<f64>);

impl FieldVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for FieldVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Builds a network with layer widths `sizes = [input, hidden.., output]`.
///
/// Weights are uniform with a fan-based limit: `sqrt(6 / (fan_in + fan_out))`
/// for tanh and `sqrt(6 / fan_in)` (standard deviation `sqrt(2 / fan_in)`)
/// for ReLU. Biases start at zero.
pub fn init_network(
    sizes: &[usize],
    activation: Activation,
    seed: u64,
) -> Result<NetworkParams, NetworkError> {
    if sizes.len() < 3 {
        return Err(NetworkError::TooFewLayers(sizes.to_vec()));
    }
    if let Some(layer) = sizes.iter().position(|&s| s == 0) {
        return Err(NetworkError::ZeroWidth { layer });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = match activation {
                Activation::Tanh => (6.0 / (fan_in + fan_out) as f64).sqrt(),
                Activation::Relu => (6.0 / fan_in as f64).sqrt(),
            };
            let weight = Matrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-limit..limit));
            Layer {
                weight,
                bias: Matrix::zeros(1, fan_out),
            }
        })
        .collect();
    Ok(NetworkParams {
        layers,
        activation,
        scaling: None,
    })
}

impl NetworkParams {
    /// Assembles a network from explicit layers. Panics if dimensions do not chain.
    pub fn from_layers(layers: Vec<Layer>, activation: Activation) -> Self {
        assert!(!layers.is_empty());
        for pair in layers.windows(2) {
            assert_eq!(
                pair[0].out_dim(),
                pair[1].in_dim(),
                "layer dimensions must chain"
            );
        }
        for l in &layers {
            assert_eq!(l.bias.shape(), (1, l.out_dim()), "bias must be 1 x out");
        }
        Self {
            layers,
            activation,
            scaling: None,
        }
    }

    pub fn with_scaling(mut self, scaling: InputScaling) -> Self {
        assert_eq!(scaling.lower.len(), self.input_dim());
        self.scaling = Some(scaling);
        self
    }

    pub fn scaling(&self) -> Option<&InputScaling> {
        self.scaling.as_ref()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Parameters flattened as `w0, b0, w1, b1, ...`, each row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(l.bias.as_slice());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length");
        let mut offset = 0;
        for l in &mut self.layers {
            for m in [&mut l.weight, &mut l.bias] {
                let n = m.len();
                m.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
                offset += n;
            }
        }
    }

    fn check_input(&self, cols: usize) -> Result<(), NetworkError> {
        if cols != self.input_dim() {
            return Err(NetworkError::InputDim {
                expected: self.input_dim(),
                got: cols,
            });
        }
        Ok(())
    }

    fn scaled_input(&self, input: &Matrix) -> Matrix {
        match &self.scaling {
            Some(s) => {
                let xs = zip_broadcast(input, &s.scale(), |x, a| x * a);
                zip_broadcast(&xs, &s.shift(), |x, b| x + b)
            }
            None => input.clone(),
        }
    }

    fn affine(layer: &Layer, a: &Matrix) -> Matrix {
        zip_broadcast(&a.matmul_t(&layer.weight), &layer.bias, |x, b| x + b)
    }

    /// Outputs for a batch of row inputs (`n x input_dim` to `n x output_dim`).
    pub fn forward_batch(&self, input: &Matrix) -> Result<Matrix, NetworkError> {
        self.check_input(input.cols())?;
        let mut a = self.scaled_input(input);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = Self::affine(layer, &a);
            a = if i == last {
                z
            } else {
                self.activation.apply(&z)
            };
        }
        Ok(a)
    }

    pub fn forward(&self, input: &[f64]) -> Result<FieldVector, NetworkError> {
        let out = self.forward_batch(&Matrix::row(input.to_vec()))?;
        Ok(FieldVector(out.into_vec()))
    }

    /// Outputs and their derivatives along each input axis in `directions`.
    ///
    /// The `k`-th returned matrix holds `d output / d input[directions[k]]`,
    /// one row per input row.
    pub fn forward_with_tangents(
        &self,
        input: &Matrix,
        directions: &[usize],
    ) -> Result<(Matrix, Vec<Matrix>), NetworkError> {
        self.check_input(input.cols())?;
        for &d in directions {
            if d >= self.input_dim() {
                return Err(NetworkError::Direction {
                    direction: d,
                    dim: self.input_dim(),
                });
            }
        }
        let mut a = self.scaled_input(input);
        let mut tangents: Vec<Matrix> = directions
            .iter()
            .map(|&d| self.seed_row(d).matmul_t(&self.layers[0].weight))
            .collect();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                tangents = tangents.iter().map(|t| t.matmul_t(&layer.weight)).collect();
            }
            let z = Self::affine(layer, &a);
            if i == last {
                a = z;
            } else {
                let act = self.activation.apply(&z);
                tangents = tangents
                    .iter()
                    .map(|t| self.activation.tangent(&z, &act, t))
                    .collect();
                a = act;
            }
        }
        // Rows of a constant-seeded tangent stay 1 x out when no activation
        // mixed in the batch (single affine layer).
        let rows = input.rows();
        let tangents = tangents
            .into_iter()
            .map(|t| {
                if t.rows() == rows {
                    t
                } else {
                    zip_broadcast(&Matrix::zeros(rows, t.cols()), &t, |z, v| z + v)
                }
            })
            .collect();
        Ok((a, tangents))
    }

    /// Single-point outputs plus Jacobian rows `jac[o][j] = d u_o / d x_j`.
    pub fn forward_with_derivatives(
        &self,
        input: &[f64],
    ) -> Result<(FieldVector, Vec<Vec<f64>>), NetworkError> {
        let dirs: Vec<usize> = (0..self.input_dim()).collect();
        let (out, tangents) = self.forward_with_tangents(&Matrix::row(input.to_vec()), &dirs)?;
        let jac = (0..self.output_dim())
            .map(|o| tangents.iter().map(|t| t.get(0, o)).collect())
            .collect();
        Ok((FieldVector(out.into_vec()), jac))
    }

    /// `1 x input_dim` seed for axis `d`, including the input scaling factor.
    fn seed_row(&self, d: usize) -> Matrix {
        let s = self
            .scaling
            .as_ref()
            .map_or(1.0, |s| 2.0 / (s.upper[d] - s.lower[d]));
        let mut row = Matrix::zeros(1, self.input_dim());
        row.set(0, d, s);
        row
    }

    /// Registers every weight and bias as a leaf named `{prefix}.w{l}` /
    /// `{prefix}.b{l}`.
    pub fn register<'t>(&self, tape: &'t Tape, prefix: &str) -> NetworkVars<'t, '_> {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                (
                    tape.leaf(format!("{prefix}.w{i}"), l.weight.clone()),
                    tape.leaf(format!("{prefix}.b{i}"), l.bias.clone()),
                )
            })
            .collect();
        NetworkVars {
            params: self,
            prefix: prefix.to_string(),
            layers,
        }
    }

    /// Registers the parameters as constants (no gradient is taken).
    pub fn constants<'t>(&self, tape: &'t Tape) -> NetworkVars<'t, '_> {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                (
                    tape.constant(l.weight.clone()),
                    tape.constant(l.bias.clone()),
                )
            })
            .collect();
        NetworkVars {
            params: self,
            prefix: String::new(),
            layers,
        }
    }

    pub fn to_checkpoint(&self) -> NetworkCheckpoint {
        NetworkCheckpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            activation: self.activation,
            input_scaling: self.scaling.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    rows: l.out_dim(),
                    cols: l.in_dim(),
                    weight: l.weight.as_slice().to_vec(),
                    bias: l.bias.as_slice().to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &NetworkCheckpoint) -> Result<Self, NetworkError> {
        if ck.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(NetworkError::Version {
                found: ck.format_version,
                expected: CHECKPOINT_FORMAT_VERSION,
            });
        }
        if ck.layers.is_empty() {
            return Err(NetworkError::Malformed("no layers".into()));
        }
        let mut layers = Vec::with_capacity(ck.layers.len());
        for (i, rec) in ck.layers.iter().enumerate() {
            if rec.weight.len() != rec.rows * rec.cols || rec.bias.len() != rec.rows {
                return Err(NetworkError::Malformed(format!(
                    "layer {i}: {} weights and {} biases for shape {}x{}",
                    rec.weight.len(),
                    rec.bias.len(),
                    rec.rows,
                    rec.cols
                )));
            }
            if i > 0 && ck.layers[i - 1].rows != rec.cols {
                return Err(NetworkError::Malformed(format!(
                    "layer {i} expects {} inputs but layer {} produces {}",
                    rec.cols,
                    i - 1,
                    ck.layers[i - 1].rows
                )));
            }
            if !rec.weight.iter().chain(&rec.bias).all(|v| v.is_finite()) {
                return Err(NetworkError::NonFinite);
            }
            layers.push(Layer {
                weight: Matrix::from_vec(rec.rows, rec.cols, rec.weight.clone()),
                bias: Matrix::row(rec.bias.clone()),
            });
        }
        let mut params = Self::from_layers(layers, ck.activation);
        if let Some(s) = &ck.input_scaling {
            if s.lower.len() != params.input_dim() || s.upper.len() != params.input_dim() {
                return Err(NetworkError::Malformed("input scaling dimension".into()));
            }
            params = params.with_scaling(s.clone());
        }
        Ok(params)
    }
}

/// A network's parameters as tape nodes.
pub struct NetworkVars<'t, 'p> {
    params: &'p NetworkParams,
    prefix: String,
    layers: Vec<(Var<'t>, Var<'t>)>,
}

impl<'t> NetworkVars<'t, '_> {
    fn tape(&self) -> &'t Tape {
        self.layers[0].0.tape()
    }

    fn scaled_input(&self, input: Var<'t>) -> Var<'t> {
        match &self.params.scaling {
            Some(s) => {
                let tape = self.tape();
                input * tape.constant(s.scale()) + tape.constant(s.shift())
            }
            None => input,
        }
    }

    fn activate(&self, z: Var<'t>) -> Var<'t> {
        match self.params.activation {
            Activation::Relu => z.relu(),
            Activation::Tanh => z.tanh(),
        }
    }

    fn activate_tangent(&self, z: Var<'t>, a: Var<'t>, t: Var<'t>) -> Var<'t> {
        match self.params.activation {
            Activation::Relu => t * z.step(),
            Activation::Tanh => t - t * a.square(),
        }
    }

    /// Recorded batch forward pass.
    pub fn forward(&self, input: Var<'t>) -> Var<'t> {
        let mut a = self.scaled_input(input);
        let last = self.layers.len() - 1;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let z = a.matmul_t(w) + b;
            a = if i == last { z } else { self.activate(z) };
        }
        a
    }

    /// Recorded outputs plus tangents along each axis in `directions`.
    pub fn forward_with_tangents(
        &self,
        input: Var<'t>,
        directions: &[usize],
    ) -> (Var<'t>, Vec<Var<'t>>) {
        let tape = self.tape();
        let mut a = self.scaled_input(input);
        let (w0, _) = self.layers[0];
        let mut tangents: Vec<Var<'t>> = directions
            .iter()
            .map(|&d| tape.constant(self.params.seed_row(d)).matmul_t(w0))
            .collect();
        let last = self.layers.len() - 1;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            if i > 0 {
                tangents = tangents.iter().map(|&t| t.matmul_t(w)).collect();
            }
            let z = a.matmul_t(w) + b;
            if i == last {
                a = z;
            } else {
                let act = self.activate(z);
                tangents = tangents
                    .iter()
                    .map(|&t| self.activate_tangent(z, act, t))
                    .collect();
                a = act;
            }
        }
        (a, tangents)
    }

    /// This network's slice of `grad`, flattened like [`NetworkParams::to_flat`].
    pub fn flat_gradient(&self, grad: &Gradient) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.params.num_params());
        for i in 0..self.layers.len() {
            for kind in ["w", "b"] {
                let name = format!("{}.{kind}{i}", self.prefix);
                let g = grad
                    .get(&name)
                    .unwrap_or_else(|| panic!("gradient has no leaf {name}"));
                out.extend_from_slice(g.as_slice());
            }
        }
        out
    }
}

/// JSON layout of a network checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub format_version: u32,
    pub activation: Activation,
    pub input_scaling: Option<InputScaling>,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}
