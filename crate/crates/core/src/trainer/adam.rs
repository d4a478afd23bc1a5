//! Adam with bias correction over one flat parameter vector.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::TrainError;

/// A named slice of the flat parameter vector, used for diagnostics and for
/// per-block learning rates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub range: Range<usize>,
}

impl Block {
    pub fn new(name: impl Into<String>, range: Range<usize>) -> Self {
        Self {
            name: name.into(),
            range,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimizerState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One Adam update in place. `rates[i]` is the learning rate of block `i`;
/// indices outside every block use `rate`.
///
/// A non-finite gradient leaves `state` and `params` untouched and names the
/// first offending block.
pub fn adam_step(
    state: &mut OptimizerState,
    params: &mut [f64],
    grads: &[f64],
    rate: f64,
    blocks: &[(Block, Option<f64>)],
) -> Result<(), TrainError> {
    assert_eq!(
        params.len(),
        state.len(),
        "optimizer/parameter length mismatch"
    );
    assert_eq!(
        grads.len(),
        state.len(),
        "gradient/parameter length mismatch"
    );
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        let block = blocks
            .iter()
            .find(|(b, _)| b.range.contains(&i))
            .map_or_else(|| "parameters".to_string(), |(b, _)| b.name.clone());
        return Err(TrainError::NonFiniteGradient { block, index: i });
    }
    let mut lr = vec![rate; params.len()];
    for (b, r) in blocks {
        if let Some(r) = r {
            lr[b.range.clone()].iter_mut().for_each(|v| *v = *r);
        }
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr[i] * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}
