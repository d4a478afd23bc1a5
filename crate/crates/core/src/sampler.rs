//! Interface-dependent data split and collocation sampling.
//!
//! Collocation points store the uniform draw `nu` rather than `x`; the
//! x-coordinate is rebuilt from the current interface position, which keeps
//! it a differentiable function of `d` during training.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::DataPoint;
use crate::physics::{CaseGeometry, Dimension};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("interface position d = {d} must lie strictly inside (0, {x_max})")]
    InterfaceOutside { d: f64, x_max: f64 },
    #[error("sample count `{name}` must be at least 1")]
    ZeroCount { name: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_data: usize,
    pub n_p1: usize,
    pub n_p2: usize,
    pub n_i: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        for (name, n) in [
            ("n_data", self.n_data),
            ("n_p1", self.n_p1),
            ("n_p2", self.n_p2),
            ("n_i", self.n_i),
        ] {
            if n == 0 {
                return Err(SamplerError::ZeroCount { name });
            }
        }
        Ok(())
    }
}

/// Where a collocation set lives and how its x-coordinate follows `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `x = nu d`
    Left,
    /// `x = nu (B - d) + d`
    Right,
    /// `x = d`
    Interface,
    /// `x = nu B`, independent of `d` (single-network baseline).
    Whole,
}

impl Region {
    /// `(a, b)` with `x = a + b d`.
    pub fn x_coefficients(self, nu: f64, x_max: f64) -> (f64, f64) {
        match self {
            Region::Left => (0.0, nu),
            Region::Right => (nu * x_max, 1.0 - nu),
            Region::Interface => (0.0, 1.0),
            Region::Whole => (nu * x_max, 0.0),
        }
    }

    pub fn x(self, nu: f64, d: f64, x_max: f64) -> f64 {
        match self {
            Region::Left => nu * d,
            Region::Right => nu * (x_max - d) + d,
            Region::Interface => d,
            Region::Whole => nu * x_max,
        }
    }
}

/// Collocation points of one region. `y` is empty in 1D; `nu` is all zeros
/// for the interface set.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    pub region: Region,
    pub nu: Vec<f64>,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl CollocationSet {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn draw<R: Rng>(region: Region, n: usize, geometry: &CaseGeometry, rng: &mut R) -> Self {
        let two_d = geometry.dim == Dimension::Two;
        let y_max = geometry.y_max.unwrap_or(0.0);
        let mut set = Self {
            region,
            nu: Vec::with_capacity(n),
            t: Vec::with_capacity(n),
            y: Vec::with_capacity(if two_d { n } else { 0 }),
        };
        for _ in 0..n {
            let nu = if region == Region::Interface {
                0.0
            } else {
                rng.random::<f64>()
            };
            set.nu.push(nu);
            set.t.push(rng.random::<f64>() * geometry.t_max);
            if two_d {
                set.y.push(rng.random::<f64>() * y_max);
            }
        }
        set
    }

    pub fn x(&self, d: f64, x_max: f64) -> Vec<f64> {
        self.nu
            .iter()
            .map(|&nu| self.region.x(nu, d, x_max))
            .collect()
    }

    /// Points `(t, x[, y])` for interface position `d`.
    pub fn coords(&self, d: f64, x_max: f64) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| {
                let mut p = vec![self.t[i], self.region.x(self.nu[i], d, x_max)];
                if !self.y.is_empty() {
                    p.push(self.y[i]);
                }
                p
            })
            .collect()
    }

    /// The sub-set `range` of points, same region.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            region: self.region,
            nu: self.nu[range.clone()].to_vec(),
            t: self.t[range.clone()].to_vec(),
            y: if self.y.is_empty() {
                Vec::new()
            } else {
                self.y[range].to_vec()
            },
        }
    }
}

/// Partition of the measurements by `x <= d` / `x > d`, order preserved.
pub fn split_data(data: &[DataPoint], d: f64) -> (Vec<&DataPoint>, Vec<&DataPoint>) {
    data.iter().partition(|p| p.x() <= d)
}

/// Draws the left, right and interface collocation sets for interface `d`.
pub fn sample_collocation<R: Rng>(
    d: f64,
    geometry: &CaseGeometry,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<(CollocationSet, CollocationSet, CollocationSet), SamplerError> {
    if !(d > 0.0 && d < geometry.x_max) {
        return Err(SamplerError::InterfaceOutside {
            d,
            x_max: geometry.x_max,
        });
    }
    let p1 = CollocationSet::draw(Region::Left, config.n_p1, geometry, rng);
    let p2 = CollocationSet::draw(Region::Right, config.n_p2, geometry, rng);
    let ci = CollocationSet::draw(Region::Interface, config.n_i, geometry, rng);
    Ok((p1, p2, ci))
}

/// Everything one training iteration consumes.
#[derive(Debug, Clone)]
pub struct SampleBatch<'a> {
    pub d: f64,
    pub x_max: f64,
    pub data1: Vec<&'a DataPoint>,
    pub data2: Vec<&'a DataPoint>,
    pub p1: CollocationSet,
    pub p2: CollocationSet,
    pub interface: CollocationSet,
}

impl<'a> SampleBatch<'a> {
    pub fn new<R: Rng>(
        data: &'a [DataPoint],
        d: f64,
        geometry: &CaseGeometry,
        config: &SamplerConfig,
        rng: &mut R,
    ) -> Result<Self, SamplerError> {
        let (p1, p2, interface) = sample_collocation(d, geometry, config, rng)?;
        let (data1, data2) = split_data(data, d);
        Ok(Self {
            d,
            x_max: geometry.x_max,
            data1,
            data2,
            p1,
            p2,
            interface,
        })
    }

    /// First violated range invariant, if any.
    pub fn violation(&self) -> Option<String> {
        let d = self.d;
        if let Some(p) = self.data1.iter().find(|p| p.x() > d) {
            return Some(format!("data point x = {} on the left of d = {d}", p.x()));
        }
        if let Some(p) = self.data2.iter().find(|p| p.x() <= d) {
            return Some(format!("data point x = {} on the right of d = {d}", p.x()));
        }
        if let Some(x) = self
            .p1
            .x(d, self.x_max)
            .into_iter()
            .find(|&x| !(0.0..=d).contains(&x))
        {
            return Some(format!("left collocation x = {x} outside [0, {d}]"));
        }
        if let Some(x) = self
            .p2
            .x(d, self.x_max)
            .into_iter()
            .find(|&x| !(d..=self.x_max).contains(&x))
        {
            return Some(format!(
                "right collocation x = {x} outside [{d}, {}]",
                self.x_max
            ));
        }
        if let Some(x) = self
            .interface
            .x(d, self.x_max)
            .into_iter()
            .find(|&x| x != d)
        {
            return Some(format!("interface x = {x} differs from d = {d}"));
        }
        None
    }
}
