#![allow(dead_code)]

pub mod gradients;
pub mod oracle;

use dapinn::analytic::{generate_dataset, AnalyticCase, Dataset};
use dapinn::autodiff::{central_difference, compare_gradients, GradCheckConfig, GradCheckReport};
use dapinn::network::Activation;
use dapinn::physics::{CaseGeometry, Dimension, MaterialParams};
use dapinn::sampler::{SampleBatch, SamplerConfig};
use dapinn::trainer::{
    composite_loss, initial_model, Architecture, LossWeights, Mode, StopCriterion, TrainConfig,
    Trained,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn tiny_config(mode: Mode, dim: Dimension, activation: Activation) -> TrainConfig {
    let initial = match dim {
        Dimension::One => MaterialParams::new(1.2, 0.8, 7.0, 1.3, 9.0),
        Dimension::Two => MaterialParams::new(1.1, 1.7, 0.9, 4.0, 3.3),
    };
    TrainConfig {
        mode,
        learning_rate: 1e-3,
        lambda_learning_rate: None,
        iterations: 10,
        resample_every: 1,
        weights: LossWeights::default(),
        clamp_fraction: 0.02,
        stop: StopCriterion::MaxIterations,
        initial,
        architecture: Architecture {
            hidden: vec![8, 8],
            activation,
            input_scaling: true,
        },
        seed: 3,
        threads: 1,
    }
}

pub fn tiny_sampler(seed: u64) -> SamplerConfig {
    SamplerConfig {
        n_data: 16,
        n_p1: 16,
        n_p2: 16,
        n_i: 8,
        seed,
    }
}

pub fn dataset(dim: Dimension, n: usize, seed: u64) -> (AnalyticCase, Dataset) {
    let case = AnalyticCase::for_dimension(dim);
    let data = generate_dataset(&case, n, seed, 0.0).unwrap();
    (case, data)
}

/// Total loss at `flat`, with the batch (and its `nu` draws) held fixed.
pub fn total_at(
    model: &Trained,
    flat: &[f64],
    batch: &SampleBatch<'_>,
    geometry: &CaseGeometry,
    weights: &LossWeights,
) -> f64 {
    let mut m = model.clone();
    m.set_flat(flat);
    composite_loss(m.models(), &m.lambda, batch, geometry, weights)
        .unwrap()
        .parts
        .total
}

/// Full-loss gradient check over every network weight and every entry of
/// lambda, using common random numbers for the collocation draws.
pub fn full_loss_gradcheck(mode: Mode, dim: Dimension, tolerance: f64) -> GradCheckReport {
    let config = tiny_config(mode, dim, Activation::Tanh);
    let (case, data) = dataset(dim, 16, 4);
    let geometry = case.geometry();
    let model = initial_model(&config, &geometry).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let batch = SampleBatch::new(
        &data.points,
        model.lambda.d,
        &geometry,
        &tiny_sampler(5),
        &mut rng,
    )
    .unwrap();
    let weights = LossWeights::default();
    let eval = composite_loss(model.models(), &model.lambda, &batch, &geometry, &weights).unwrap();
    let flat = model.flat();
    let numeric = central_difference(
        |p| total_at(&model, p, &batch, &geometry, &weights),
        &flat,
        1e-5,
    );
    let n = flat.len();
    let names: Vec<String> = (0..n)
        .map(|i| {
            if i >= n - 5 {
                MaterialParams::NAMES[i + 5 - n].to_string()
            } else {
                format!("theta[{i}]")
            }
        })
        .collect();
    let config = GradCheckConfig {
        step: 1e-5,
        tolerance,
        floor: 1e-6,
    };
    compare_gradients(&names, &eval.gradient, &numeric, &config)
}
