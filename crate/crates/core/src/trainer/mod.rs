//! Joint training of the field networks and the material parameters.
//!
//! [`train_da_pinn`] runs the interface-adaptive loop with one network per
//! medium; [`train_baseline`] fits a single network with piecewise materials
//! and no interface loss.

mod adam;
mod loss;
mod model;

use std::io::{Read, Write};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_step, Block, OptimizerState};
pub use loss::{composite_loss, LossEval, LossParts, LossWeights, Models, CHUNK};
pub use model::{AnalyticModel, FieldModel, Recorded};

use crate::analytic::{AnalyticError, DataPoint};
use crate::autodiff::Matrix;
use crate::network::{
    init_network, Activation, FieldVector, InputScaling, NetworkCheckpoint, NetworkError,
    NetworkParams,
};
use crate::physics::{CaseGeometry, MaterialParams};
use crate::sampler::{
    split_data, CollocationSet, Region, SampleBatch, SamplerConfig, SamplerError,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("non-finite gradient in block `{block}` (entry {index})")]
    NonFiniteGradient { block: String, index: usize },
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),
    #[error("training stopped at iteration {iteration}: {source}")]
    Aborted {
        iteration: usize,
        #[source]
        source: Box<TrainError>,
        /// State before the failing iteration.
        last_good: Box<Checkpoint>,
    },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("point {point:?} lies outside the domain")]
    OutOfDomain { point: Vec<f64> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "da-pinn")]
    DaPinn,
    #[serde(rename = "baseline")]
    Baseline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::DaPinn => "da-pinn",
            Mode::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "da-pinn" => Ok(Mode::DaPinn),
            "baseline" => Ok(Mode::Baseline),
            _ => Err(format!("unknown mode `{s}` (expected da-pinn or baseline)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StopCriterion {
    MaxIterations,
    /// Stop once `|L_k - L_{k-window}| / |L_{k-window}| < threshold`.
    Plateau {
        window: usize,
        threshold: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Map the space-time box to `[-1, 1]` per axis before the first layer.
    pub input_scaling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: Mode,
    pub learning_rate: f64,
    /// Separate learning rate for `lambda`; `None` shares `learning_rate`.
    pub lambda_learning_rate: Option<f64>,
    pub iterations: usize,
    /// Collocation sets are redrawn every this many iterations.
    pub resample_every: usize,
    pub weights: LossWeights,
    /// `delta / B` for the clamp `d in [delta, B - delta]`.
    pub clamp_fraction: f64,
    pub stop: StopCriterion,
    pub initial: MaterialParams,
    pub architecture: Architecture,
    pub seed: u64,
    /// Worker threads for loss evaluation; 0 uses all cores.
    pub threads: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        // A zero rate is accepted and freezes every parameter.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            ));
        }
        if let Some(r) = self.lambda_learning_rate {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("lambda_learning_rate must be > 0, got {r}"));
            }
        }
        if self.resample_every == 0 {
            return bad("resample_every must be >= 1".into());
        }
        if !(self.clamp_fraction > 0.0 && self.clamp_fraction < 0.5) {
            return bad(format!(
                "clamp_fraction must lie in (0, 0.5), got {}",
                self.clamp_fraction
            ));
        }
        if self.architecture.hidden.is_empty() || self.architecture.hidden.contains(&0) {
            return bad("architecture.hidden needs at least one layer, all widths >= 1".into());
        }
        if let StopCriterion::Plateau { window, threshold } = self.stop {
            if window == 0 || threshold.is_nan() || threshold <= 0.0 {
                return bad("plateau window must be >= 1 and threshold > 0".into());
            }
        }
        if !self.initial.is_finite() {
            return bad("initial parameters must be finite".into());
        }
        Ok(())
    }
}

/// One row of the training trace. `lambda` is the value used in the loss at
/// this iteration (after clamping).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub loss_d: f64,
    pub loss_p: f64,
    pub loss_i: f64,
    pub total: f64,
    pub mu1: f64,
    pub eps1: f64,
    pub mu2: f64,
    pub eps2: f64,
    pub d: f64,
    pub ms: f64,
    #[serde(skip)]
    pub empty_d1: bool,
    #[serde(skip)]
    pub empty_d2: bool,
}

impl TraceRecord {
    pub fn lambda(&self) -> MaterialParams {
        MaterialParams::new(self.mu1, self.eps1, self.mu2, self.eps2, self.d)
    }

    /// Same record with the timing column zeroed.
    pub fn untimed(&self) -> Self {
        Self {
            ms: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    pub const HEADER: [&'static str; 11] = [
        "iter", "loss_d", "loss_p", "loss_i", "total", "mu1", "eps1", "mu2", "eps2", "d", "ms",
    ];

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Iterations at which one side of the data split was empty.
    pub fn empty_split_iterations(&self) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| r.empty_d1 || r.empty_d2)
            .map(|r| r.iter)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(Self::HEADER)
            .map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        for r in &self.records {
            let row = [
                r.iter as f64,
                r.loss_d,
                r.loss_p,
                r.loss_i,
                r.total,
                r.mu1,
                r.eps1,
                r.mu2,
                r.eps2,
                r.d,
                r.ms,
            ];
            w.write_record(row.iter().enumerate().map(|(i, v)| {
                if i == 0 {
                    r.iter.to_string()
                } else {
                    v.to_string()
                }
            }))
            .map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, TrainError> {
        let mut r = csv::Reader::from_reader(r);
        let header: Vec<String> = r
            .headers()
            .map_err(|e| TrainError::Checkpoint(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header != Self::HEADER {
            return Err(TrainError::Checkpoint(format!(
                "unexpected trace header {header:?}"
            )));
        }
        let records = r
            .deserialize()
            .collect::<Result<Vec<TraceRecord>, _>>()
            .map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        Ok(Self { records })
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Networks, parameters and optimizer state after some iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub mode: Mode,
    pub iterations: usize,
    pub lambda: MaterialParams,
    pub networks: Vec<NetworkCheckpoint>,
    pub optimizer: OptimizerState,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, TrainError> {
        let ck: Self =
            serde_json::from_str(s).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(TrainError::Checkpoint(format!(
                "format version {} (expected {CHECKPOINT_VERSION})",
                ck.format_version
            )));
        }
        Ok(ck)
    }

    pub fn model(&self) -> Result<Trained, TrainError> {
        let nets = self
            .networks
            .iter()
            .map(NetworkParams::from_checkpoint)
            .collect::<Result<Vec<_>, _>>()?;
        let expected = match self.mode {
            Mode::DaPinn => 2,
            Mode::Baseline => 1,
        };
        if nets.len() != expected {
            return Err(TrainError::Checkpoint(format!(
                "{} checkpoint with {} networks",
                self.mode.name(),
                nets.len()
            )));
        }
        Ok(Trained {
            mode: self.mode,
            nets,
            lambda: self.lambda,
            trace: TrainTrace::default(),
            optimizer: self.optimizer.clone(),
        })
    }
}

/// Result of training: networks, estimated parameters, trace and the final
/// optimizer state.
#[derive(Debug, Clone)]
pub struct Trained {
    pub mode: Mode,
    pub nets: Vec<NetworkParams>,
    pub lambda: MaterialParams,
    pub trace: TrainTrace,
    pub optimizer: OptimizerState,
}

impl Trained {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            mode: self.mode,
            iterations: self.optimizer.step as usize,
            lambda: self.lambda,
            networks: self.nets.iter().map(|n| n.to_checkpoint()).collect(),
            optimizer: self.optimizer.clone(),
        }
    }

    pub fn models(&self) -> Models<'_> {
        match self.mode {
            Mode::DaPinn => Models::Split(&self.nets[0], &self.nets[1]),
            Mode::Baseline => Models::Single(&self.nets[0]),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.nets.iter().flat_map(|n| n.to_flat()).collect();
        v.extend(self.lambda.to_array());
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for n in &mut self.nets {
            let k = n.num_params();
            n.set_flat(&flat[off..off + k]);
            off += k;
        }
        self.lambda = MaterialParams::from_slice(&flat[off..off + 5]);
    }

    fn blocks(&self, lambda_rate: Option<f64>) -> Vec<(Block, Option<f64>)> {
        let mut out = Vec::new();
        let mut off = 0;
        for (i, n) in self.nets.iter().enumerate() {
            let k = n.num_params();
            let name = if self.nets.len() == 1 {
                "theta".to_string()
            } else {
                format!("theta{}", i + 1)
            };
            out.push((Block::new(name, off..off + k), None));
            off += k;
        }
        out.push((Block::new("lambda", off..off + 5), lambda_rate));
        out
    }
}

/// Derives independent seeds for the separate random streams of one run.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    // SplitMix64 finalizer.
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn build_net(
    config: &TrainConfig,
    geometry: &CaseGeometry,
    stream: u64,
) -> Result<NetworkParams, TrainError> {
    let dim = geometry.dim;
    let mut sizes = vec![dim.input_dim()];
    sizes.extend(&config.architecture.hidden);
    sizes.push(dim.field_count());
    let net = init_network(
        &sizes,
        config.architecture.activation,
        sub_seed(config.seed, stream),
    )?;
    Ok(if config.architecture.input_scaling {
        net.with_scaling(InputScaling::new(
            vec![0.0; dim.input_dim()],
            geometry.upper_bounds(),
        ))
    } else {
        net
    })
}

/// Freshly initialised model for `config` (before any iteration).
pub fn initial_model(config: &TrainConfig, geometry: &CaseGeometry) -> Result<Trained, TrainError> {
    let nets = match config.mode {
        Mode::DaPinn => vec![
            build_net(config, geometry, 1)?,
            build_net(config, geometry, 2)?,
        ],
        Mode::Baseline => vec![build_net(config, geometry, 1)?],
    };
    let n: usize = nets.iter().map(|n| n.num_params()).sum::<usize>() + 5;
    Ok(Trained {
        mode: config.mode,
        nets,
        lambda: config.initial,
        trace: TrainTrace::default(),
        optimizer: OptimizerState::new(n),
    })
}

/// Interface-adaptive training with one network per medium.
pub fn train_da_pinn(
    config: &TrainConfig,
    sampler: &SamplerConfig,
    data: &[DataPoint],
    geometry: &CaseGeometry,
) -> Result<Trained, TrainError> {
    if config.mode != Mode::DaPinn {
        return Err(TrainError::Config(
            "train_da_pinn needs mode da-pinn".into(),
        ));
    }
    train(config, sampler, data, geometry)
}

/// Single-network training with piecewise materials and uniform collocation.
pub fn train_baseline(
    config: &TrainConfig,
    sampler: &SamplerConfig,
    data: &[DataPoint],
    geometry: &CaseGeometry,
) -> Result<Trained, TrainError> {
    if config.mode != Mode::Baseline {
        return Err(TrainError::Config(
            "train_baseline needs mode baseline".into(),
        ));
    }
    train(config, sampler, data, geometry)
}

/// Trains according to `config.mode`.
pub fn train(
    config: &TrainConfig,
    sampler: &SamplerConfig,
    data: &[DataPoint],
    geometry: &CaseGeometry,
) -> Result<Trained, TrainError> {
    train_observed(config, sampler, data, geometry, &mut |_| {})
}

/// Like [`train`], calling `observe` with every trace record as it is made.
pub fn train_observed(
    config: &TrainConfig,
    sampler: &SamplerConfig,
    data: &[DataPoint],
    geometry: &CaseGeometry,
    observe: &mut (dyn FnMut(&TraceRecord) + Send),
) -> Result<Trained, TrainError> {
    config.validate()?;
    sampler.validate()?;
    if data.is_empty() {
        return Err(TrainError::Config("the training dataset is empty".into()));
    }
    let model = initial_model(config, geometry)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| TrainError::Config(e.to_string()))?;
    pool.install(|| run_loop(config, sampler, data, geometry, model, observe))
}

/// Collocation draws that stay fixed between resamplings.
struct Draws {
    p1: CollocationSet,
    p2: CollocationSet,
    interface: CollocationSet,
}

fn draw(
    mode: Mode,
    geometry: &CaseGeometry,
    sampler: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Draws {
    match mode {
        Mode::DaPinn => Draws {
            p1: CollocationSet::draw(Region::Left, sampler.n_p1, geometry, rng),
            p2: CollocationSet::draw(Region::Right, sampler.n_p2, geometry, rng),
            interface: CollocationSet::draw(Region::Interface, sampler.n_i, geometry, rng),
        },
        Mode::Baseline => {
            let empty = CollocationSet::draw(Region::Interface, 0, geometry, rng);
            Draws {
                p1: CollocationSet::draw(Region::Whole, sampler.n_p1 + sampler.n_p2, geometry, rng),
                p2: empty.clone(),
                interface: empty,
            }
        }
    }
}

fn run_loop(
    config: &TrainConfig,
    sampler: &SamplerConfig,
    data: &[DataPoint],
    geometry: &CaseGeometry,
    mut model: Trained,
    observe: &mut (dyn FnMut(&TraceRecord) + Send),
) -> Result<Trained, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(sampler.seed, 3));
    let delta = config.clamp_fraction * geometry.x_max;
    let blocks = model.blocks(config.lambda_learning_rate);
    let mut draws = None;
    for k in 0..config.iterations {
        let start = Instant::now();
        model.lambda.d = model.lambda.d.clamp(delta, geometry.x_max - delta);
        if k % config.resample_every == 0 || draws.is_none() {
            draws = Some(draw(config.mode, geometry, sampler, &mut rng));
        }
        let dr = draws.as_ref().expect("drawn above");
        let d = model.lambda.d;
        let (data1, data2) = match config.mode {
            Mode::DaPinn => split_data(data, d),
            Mode::Baseline => (data.iter().collect(), Vec::new()),
        };
        let batch = SampleBatch {
            d,
            x_max: geometry.x_max,
            data1,
            data2,
            p1: dr.p1.clone(),
            p2: dr.p2.clone(),
            interface: dr.interface.clone(),
        };
        let abort = |source: TrainError, model: &Trained| TrainError::Aborted {
            iteration: k,
            source: Box::new(source),
            last_good: Box::new(model.checkpoint()),
        };
        let eval = match composite_loss(
            model.models(),
            &model.lambda,
            &batch,
            geometry,
            &config.weights,
        ) {
            Ok(e) => e,
            Err(e) => return Err(abort(e, &model)),
        };
        if !eval.parts.total.is_finite() {
            return Err(abort(
                TrainError::NonFiniteLoss(format!("total loss {}", eval.parts.total)),
                &model,
            ));
        }
        let used = model.lambda;
        let mut flat = model.flat();
        let mut state = model.optimizer.clone();
        if let Err(e) = adam_step(
            &mut state,
            &mut flat,
            &eval.gradient,
            config.learning_rate,
            &blocks,
        ) {
            return Err(abort(e, &model));
        }
        model.optimizer = state;
        model.set_flat(&flat);
        model.trace.records.push(TraceRecord {
            iter: k,
            loss_d: eval.parts.loss_d,
            loss_p: eval.parts.loss_p,
            loss_i: eval.parts.loss_i,
            total: eval.parts.total,
            mu1: used.mu1,
            eps1: used.eps1,
            mu2: used.mu2,
            eps2: used.eps2,
            d: used.d,
            ms: start.elapsed().as_secs_f64() * 1e3,
            empty_d1: eval.empty_d1,
            empty_d2: eval.empty_d2,
        });
        observe(model.trace.records.last().expect("just pushed"));
        if let StopCriterion::Plateau { window, threshold } = config.stop {
            let r = &model.trace.records;
            if r.len() > window {
                let old = r[r.len() - 1 - window].total;
                let new = r[r.len() - 1].total;
                if ((new - old) / old).abs() < threshold {
                    break;
                }
            }
        }
    }
    Ok(model)
}

/// Field predictions at `points`. Two-network models route `x <= d` to the
/// first network.
pub fn predict(
    model: &Trained,
    points: &[Vec<f64>],
    geometry: &CaseGeometry,
) -> Result<Vec<FieldVector>, TrainError> {
    if let Some(p) = points.iter().find(|p| !geometry.contains(p)) {
        return Err(TrainError::OutOfDomain { point: p.clone() });
    }
    let dim = geometry.dim.input_dim();
    let mut out = vec![FieldVector(Vec::new()); points.len()];
    let groups: Vec<(usize, Vec<usize>)> = match model.mode {
        Mode::Baseline => vec![(0, (0..points.len()).collect())],
        Mode::DaPinn => {
            let (l, r): (Vec<usize>, Vec<usize>) =
                (0..points.len()).partition(|&i| points[i][1] <= model.lambda.d);
            vec![(0, l), (1, r)]
        }
    };
    for (net, idx) in groups {
        if idx.is_empty() {
            continue;
        }
        let input = Matrix::from_fn(idx.len(), dim, |r, c| points[idx[r]][c]);
        let y = model.nets[net].forward_batch(&input)?;
        for (r, &i) in idx.iter().enumerate() {
            out[i] = FieldVector(y.row_slice(r).to_vec());
        }
    }
    Ok(out)
}
