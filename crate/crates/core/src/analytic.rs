//! Closed-form fields for the two benchmark media, synthetic datasets and
//! the l2 relative error.
//!
//! Field formulas are generic over [`Elementary`] so they evaluate on plain
//! numbers, on tape nodes, and on forward tangents (which is how the residual
//! oracles obtain exact derivatives).

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Elementary;
use crate::physics::{CaseGeometry, Dimension, MaterialParams, Side};

#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error("point {point:?} lies outside the domain {bounds:?}")]
    OutOfDomain { point: Vec<f64>, bounds: Vec<f64> },
    #[error("reference norm is zero; relative error undefined")]
    ZeroNorm,
    #[error("length mismatch: {left} vs {right}")]
    Length { left: usize, right: usize },
    #[error("noise standard deviation must be finite and >= 0, got {0}")]
    Noise(f64),
    #[error("dataset csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for AnalyticError {
    fn from(e: csv::Error) -> Self {
        AnalyticError::Csv(e.to_string())
    }
}

/// Plane wave hitting the interface `x = d` from the left.
///
/// In the first medium the field is the incident wave plus its reflection, in
/// the second the transmitted wave. All constants derive from the media and
/// the frequency; for the benchmark they are `k = 0.1 / 0.3`, `R = 0.5`,
/// `T = 1.5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticCase1D {
    pub params: MaterialParams,
    pub geometry: CaseGeometry,
    pub frequency: f64,
    pub wavenumber1: f64,
    pub wavenumber2: f64,
    pub incident: f64,
    pub reflected: f64,
    pub transmitted: f64,
    impedance1: f64,
    impedance2: f64,
}

impl AnalyticCase1D {
    pub fn new(params: MaterialParams, geometry: CaseGeometry, frequency: f64) -> Self {
        let k1 = frequency * (params.mu1 * params.eps1).sqrt();
        let k2 = frequency * (params.mu2 * params.eps2).sqrt();
        let eta1 = (params.mu1 / params.eps1).sqrt();
        let eta2 = (params.mu2 / params.eps2).sqrt();
        let reflected = (eta2 - eta1) / (eta2 + eta1);
        Self {
            params,
            geometry,
            frequency,
            wavenumber1: k1,
            wavenumber2: k2,
            incident: 1.0,
            reflected,
            transmitted: 1.0 + reflected,
            impedance1: eta1,
            impedance2: eta2,
        }
    }

    /// `mu = (1, 9)`, `eps = (1, 1)`, `d = 10` on `t in [0,10]`, `x in [0,20]`.
    pub fn benchmark() -> Self {
        Self::new(
            MaterialParams::new(1.0, 1.0, 9.0, 1.0, 10.0),
            CaseGeometry::one_d(10.0, 20.0),
            0.1,
        )
    }

    /// `[E_Y, H_Z]` from the formula of one medium, without domain checks.
    pub fn fields<E: Elementary>(&self, side: Side, t: E, x: E) -> [E; 2] {
        let w = self.frequency;
        let d = self.params.d;
        match side {
            Side::One => {
                let k = self.wavenumber1;
                let inc = (t.scale(w) - x.scale(k)).offset(k * d).cos();
                let refl = (t.scale(w) + x.scale(k)).offset(-k * d).cos();
                let e = inc.scale(self.incident) + refl.scale(self.reflected);
                let h = (inc.scale(self.incident) - refl.scale(self.reflected))
                    .scale(1.0 / self.impedance1);
                [e, h]
            }
            Side::Two => {
                let k = self.wavenumber2;
                let tr = (t.scale(w) - x.scale(k)).offset(k * d).cos();
                [
                    tr.scale(self.transmitted),
                    tr.scale(self.transmitted / self.impedance2),
                ]
            }
        }
    }
}

/// Standing TE mode in a medium with `mu = 1`, `eps = (2, 5)`, `d = pi`.
///
/// `omega^2 = (kx^2 + ky^2) / (mu eps)` gives `omega = 2` on both sides for
/// `kx = (2, 4)`, `ky = 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticCase2D {
    pub params: MaterialParams,
    pub geometry: CaseGeometry,
    pub kx1: f64,
    pub kx2: f64,
    pub ky: f64,
    pub omega: f64,
}

impl AnalyticCase2D {
    pub fn benchmark() -> Self {
        let params = MaterialParams::new(1.0, 2.0, 1.0, 5.0, PI);
        let (kx1, kx2, ky) = (2.0, 4.0, 2.0);
        Self {
            params,
            geometry: CaseGeometry::two_d(2.0, 2.0 * PI, 2.0 * PI),
            kx1,
            kx2,
            ky,
            omega: ((kx1 * kx1 + ky * ky) / (params.mu1 * params.eps1)).sqrt(),
        }
    }

    /// `[E_X, E_Y, H_Z]` from the formula of one medium.
    pub fn fields<E: Elementary>(&self, side: Side, t: E, x: E, y: E) -> [E; 3] {
        let (mu, eps) = self.params.side(side);
        let kx = match side {
            Side::One => self.kx1,
            Side::Two => self.kx2,
        };
        let (w, ky) = (self.omega, self.ky);
        let amp = 1.0 / (eps * mu.sqrt() * w);
        let ct = t.scale(w).cos();
        let (cx, sx) = (x.scale(kx).cos(), x.scale(kx).sin());
        let (cy, sy) = (y.scale(ky).cos(), y.scale(ky).sin());
        [
            (ct * cx * sy).scale(ky * amp),
            (ct * sx * cy).scale(-kx * amp),
            (t.scale(w).sin() * cx * cy).scale(1.0 / mu.sqrt()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticCase {
    OneD(AnalyticCase1D),
    TwoD(AnalyticCase2D),
}

impl AnalyticCase {
    pub fn for_dimension(dim: Dimension) -> Self {
        match dim {
            Dimension::One => AnalyticCase::OneD(AnalyticCase1D::benchmark()),
            Dimension::Two => AnalyticCase::TwoD(AnalyticCase2D::benchmark()),
        }
    }

    pub fn geometry(&self) -> CaseGeometry {
        match self {
            AnalyticCase::OneD(c) => c.geometry,
            AnalyticCase::TwoD(c) => c.geometry,
        }
    }

    pub fn true_params(&self) -> MaterialParams {
        match self {
            AnalyticCase::OneD(c) => c.params,
            AnalyticCase::TwoD(c) => c.params,
        }
    }

    pub fn dim(&self) -> Dimension {
        self.geometry().dim
    }

    /// Fields of one medium's formula at `coords = (t, x[, y])`.
    pub fn fields_on<E: Elementary>(&self, side: Side, coords: &[E]) -> Vec<E> {
        match self {
            AnalyticCase::OneD(c) => c.fields(side, coords[0], coords[1]).to_vec(),
            AnalyticCase::TwoD(c) => c.fields(side, coords[0], coords[1], coords[2]).to_vec(),
        }
    }

    /// Piecewise true fields; the plane `x = d` takes the first medium.
    pub fn eval(&self, coords: &[f64]) -> Result<Vec<f64>, AnalyticError> {
        let geo = self.geometry();
        if !geo.contains(coords) {
            return Err(AnalyticError::OutOfDomain {
                point: coords.to_vec(),
                bounds: geo.upper_bounds(),
            });
        }
        Ok(self.fields_on(Side::of(coords[1], self.true_params().d), coords))
    }
}

pub fn eval_1d(case: &AnalyticCase1D, t: f64, x: f64) -> Result<[f64; 2], AnalyticError> {
    let v = AnalyticCase::OneD(*case).eval(&[t, x])?;
    Ok([v[0], v[1]])
}

pub fn eval_2d(case: &AnalyticCase2D, t: f64, x: f64, y: f64) -> Result<[f64; 3], AnalyticError> {
    let v = AnalyticCase::TwoD(*case).eval(&[t, x, y])?;
    Ok([v[0], v[1], v[2]])
}

/// One measurement: coordinates `(t, x[, y])` and field values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub coords: Vec<f64>,
    pub fields: Vec<f64>,
}

impl DataPoint {
    pub fn x(&self) -> f64 {
        self.coords[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: Dimension,
    pub points: Vec<DataPoint>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn header(dim: Dimension) -> Vec<&'static str> {
        let mut h = dim.coordinate_names().to_vec();
        h.extend_from_slice(dim.field_names());
        h
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), AnalyticError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::header(self.dim))?;
        for p in &self.points {
            // `Display` for f64 prints the shortest string that round-trips.
            w.write_record(p.coords.iter().chain(&p.fields).map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, AnalyticError> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let dim = [Dimension::One, Dimension::Two]
            .into_iter()
            .find(|&d| Self::header(d) == header)
            .ok_or_else(|| AnalyticError::Csv(format!("unrecognised header {header:?}")))?;
        let nc = dim.input_dim();
        let mut points = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| AnalyticError::Csv(format!("row {}: {e}", line + 1)))?;
            points.push(DataPoint {
                coords: vals[..nc].to_vec(),
                fields: vals[nc..].to_vec(),
            });
        }
        Ok(Self { dim, points })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AnalyticError> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AnalyticError> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Uniform point in the space-time box.
pub fn uniform_point<R: Rng>(geometry: &CaseGeometry, rng: &mut R) -> Vec<f64> {
    geometry
        .upper_bounds()
        .iter()
        .map(|&u| rng.random::<f64>() * u)
        .collect()
}

/// `n` measurements at uniform points, with optional Gaussian noise per
/// component. The locations depend only on `seed`.
pub fn generate_dataset(
    case: &AnalyticCase,
    n: usize,
    seed: u64,
    noise_sd: f64,
) -> Result<Dataset, AnalyticError> {
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(AnalyticError::Noise(noise_sd));
    }
    let geo = case.geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // separate stream so the locations do not depend on the noise level
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    let noise = Normal::new(0.0, noise_sd).map_err(|_| AnalyticError::Noise(noise_sd))?;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let coords = uniform_point(&geo, &mut rng);
        let mut fields = case.eval(&coords)?;
        if noise_sd > 0.0 {
            for f in &mut fields {
                *f += noise.sample(&mut noise_rng);
            }
        }
        points.push(DataPoint { coords, fields });
    }
    Ok(Dataset {
        dim: geo.dim,
        points,
    })
}

/// `||u - u_hat||_2 / ||u||_2`.
pub fn l2_relative_error(u: &[f64], u_hat: &[f64]) -> Result<f64, AnalyticError> {
    if u.len() != u_hat.len() {
        return Err(AnalyticError::Length {
            left: u.len(),
            right: u_hat.len(),
        });
    }
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(AnalyticError::ZeroNorm);
    }
    let diff = u
        .iter()
        .zip(u_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm)
}

/// Evaluation grid: `nt x nx` over `(t, x)` in 1D; `nx x ny` over `(x, y)`
/// at each time in `t_slices` in 2D. Grids include both end points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nt: usize,
    pub nx: usize,
    pub ny: usize,
    pub t_slices: Vec<f64>,
}

impl GridSpec {
    pub fn default_for(dim: Dimension) -> Self {
        match dim {
            Dimension::One => Self {
                nt: 201,
                nx: 201,
                ny: 0,
                t_slices: Vec::new(),
            },
            Dimension::Two => Self {
                nt: 0,
                nx: 101,
                ny: 101,
                t_slices: vec![0.5, 1.0, 1.5],
            },
        }
    }

    /// Grid points in row-major order (slowest axis first).
    pub fn points(&self, geometry: &CaseGeometry) -> Vec<Vec<f64>> {
        match geometry.dim {
            Dimension::One => {
                let ts = linspace(geometry.t_max, self.nt);
                let xs = linspace(geometry.x_max, self.nx);
                ts.iter()
                    .flat_map(|&t| xs.iter().map(move |&x| vec![t, x]))
                    .collect()
            }
            Dimension::Two => {
                let xs = linspace(geometry.x_max, self.nx);
                let ys = linspace(geometry.y_max.unwrap_or(0.0), self.ny);
                let mut out = Vec::with_capacity(self.t_slices.len() * xs.len() * ys.len());
                for &t in &self.t_slices {
                    for &x in &xs {
                        for &y in &ys {
                            out.push(vec![t, x, y]);
                        }
                    }
                }
                out
            }
        }
    }
}

/// `n` evenly spaced points on `[0, upper]`; the last is exactly `upper`.
pub fn linspace(upper: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    upper
                } else {
                    upper * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}
