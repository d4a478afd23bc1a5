//! Hand-derived closed forms and derivatives of the two benchmark solutions.
//!
//! Everything here is written out independently of `dapinn::analytic`, with
//! the benchmark constants typed in directly.

use dapinn::analytic::AnalyticCase;
use dapinn::autodiff::{Dual, Matrix, Tape};
use dapinn::physics::{
    residual_1d, residual_2d, CaseGeometry, Derivs1d, Derivs2d, Dimension, MaterialParams, Side,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Values `[E_Y, H_Z]` and first derivatives of the 1D benchmark.
pub fn hand_1d(side: Side, t: f64, x: f64) -> ([f64; 2], Derivs1d<f64>) {
    match side {
        Side::One => {
            let p1 = 0.1 * t - 0.1 * x + 1.0;
            let p2 = 0.1 * t + 0.1 * x - 1.0;
            let (c1, s1, c2, s2) = (p1.cos(), p1.sin(), p2.cos(), p2.sin());
            (
                [c1 + 0.5 * c2, c1 - 0.5 * c2],
                Derivs1d {
                    ey_x: 0.1 * s1 - 0.05 * s2,
                    ey_t: -0.1 * s1 - 0.05 * s2,
                    hz_x: 0.1 * s1 + 0.05 * s2,
                    hz_t: -0.1 * s1 + 0.05 * s2,
                },
            )
        }
        Side::Two => {
            let p = 0.1 * t - 0.3 * x + 3.0;
            let (c, s) = (p.cos(), p.sin());
            (
                [1.5 * c, 0.5 * c],
                Derivs1d {
                    ey_x: 0.45 * s,
                    ey_t: -0.15 * s,
                    hz_x: 0.15 * s,
                    hz_t: -0.05 * s,
                },
            )
        }
    }
}

/// Values `[E_X, E_Y, H_Z]` and first derivatives of the 2D benchmark.
pub fn hand_2d(side: Side, t: f64, x: f64, y: f64) -> ([f64; 3], Derivs2d<f64>) {
    let (eps, kx) = match side {
        Side::One => (2.0, 2.0),
        Side::Two => (5.0, 4.0),
    };
    let (w, ky) = (2.0, 2.0);
    let (ct, st) = ((w * t).cos(), (w * t).sin());
    let (cx, sx) = ((kx * x).cos(), (kx * x).sin());
    let (cy, sy) = ((ky * y).cos(), (ky * y).sin());
    let a = 1.0 / (eps * w);
    (
        [ky * a * ct * cx * sy, -kx * a * ct * sx * cy, st * cx * cy],
        Derivs2d {
            ex_t: -ky / eps * st * cx * sy,
            ex_y: ky * ky * a * ct * cx * cy,
            ey_t: kx / eps * st * sx * cy,
            ey_x: -kx * kx * a * ct * cx * cy,
            hz_t: w * ct * cx * cy,
            hz_x: -kx * st * sx * cy,
            hz_y: -ky * st * cx * sy,
        },
    )
}

pub fn benchmark_params(dim: Dimension) -> MaterialParams {
    match dim {
        Dimension::One => MaterialParams::new(1.0, 1.0, 9.0, 1.0, 10.0),
        Dimension::Two => MaterialParams::new(1.0, 2.0, 1.0, 5.0, PI),
    }
}

pub fn benchmark_geometry(dim: Dimension) -> CaseGeometry {
    match dim {
        Dimension::One => CaseGeometry::one_d(10.0, 20.0),
        Dimension::Two => CaseGeometry::two_d(2.0, 2.0 * PI, 2.0 * PI),
    }
}

/// Uniform points inside one medium (`side`) of the benchmark box.
pub fn points_on(dim: Dimension, side: Side, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let ub = benchmark_geometry(dim).upper_bounds();
    let d = benchmark_params(dim).d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut p: Vec<f64> = ub.iter().map(|&u| rng.random::<f64>() * u).collect();
            p[1] = match side {
                Side::One => rng.random::<f64>() * d,
                Side::Two => d + rng.random::<f64>() * (ub[1] - d),
            };
            p
        })
        .collect()
}

/// Points on the interface plane.
pub fn interface_points(dim: Dimension, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = benchmark_params(dim).d;
    let mut pts = points_on(dim, Side::One, n, seed);
    for p in &mut pts {
        p[1] = d;
    }
    pts
}

/// Field values and all coordinate partials of the library's closed form,
/// obtained through forward tangents. `out[axis][field][point]`, with
/// `axis == 0` holding the values.
pub fn library_partials(
    case: &AnalyticCase,
    side: Side,
    points: &[Vec<f64>],
) -> Vec<Vec<Vec<f64>>> {
    let n_in = points[0].len();
    let mut out = Vec::new();
    for axis in 0..=n_in {
        let tape = Tape::new();
        let coords: Vec<Dual<'_>> = (0..n_in)
            .map(|j| {
                let v = tape.constant(Matrix::column(points.iter().map(|p| p[j]).collect()));
                if axis == j + 1 {
                    Dual::seeded(v)
                } else {
                    Dual::constant(v)
                }
            })
            .collect();
        let fields = case.fields_on(side, &coords);
        out.push(
            fields
                .iter()
                .map(|f| {
                    let node = if axis == 0 {
                        f.value
                    } else {
                        f.tangent_or_zero()
                    };
                    node.value().into_vec()
                })
                .collect(),
        );
    }
    out
}

#[derive(Debug, Default, Clone, Copy)]
pub struct OracleReport {
    /// Largest |library - hand| over values and partials.
    pub max_mismatch: f64,
    /// Largest |residual| of the hand-derived derivatives.
    pub max_hand_residual: f64,
    /// Largest |residual| of the library's differentiated fields.
    pub max_library_residual: f64,
}

/// Compares the library closed form against the hand formulas on `n`
/// random points per medium.
pub fn compare_oracle(dim: Dimension, n: usize, seed: u64) -> OracleReport {
    let case = AnalyticCase::for_dimension(dim);
    let params = benchmark_params(dim);
    let mut r = OracleReport::default();
    for (k, side) in [Side::One, Side::Two].into_iter().enumerate() {
        let pts = points_on(dim, side, n, seed + k as u64);
        let lib = library_partials(&case, side, &pts);
        let (mu, eps) = params.side(side);
        for (i, p) in pts.iter().enumerate() {
            let g = |axis: usize, field: usize| lib[axis][field][i];
            let (hand, lib_res, hand_res, hand_flat, lib_flat) = match dim {
                Dimension::One => {
                    let (v, dh) = hand_1d(side, p[0], p[1]);
                    // fields [E_Y, H_Z]; axes 1 = t, 2 = x
                    let dl = Derivs1d {
                        ey_x: g(2, 0),
                        ey_t: g(1, 0),
                        hz_x: g(2, 1),
                        hz_t: g(1, 1),
                    };
                    let rh = residual_1d(&dh, mu, eps);
                    let rl = residual_1d(&dl, mu, eps);
                    (
                        v.to_vec(),
                        rl.f.abs().max(rl.h.abs()),
                        rh.f.abs().max(rh.h.abs()),
                        vec![dh.ey_x, dh.ey_t, dh.hz_x, dh.hz_t],
                        vec![dl.ey_x, dl.ey_t, dl.hz_x, dl.hz_t],
                    )
                }
                Dimension::Two => {
                    let (v, dh) = hand_2d(side, p[0], p[1], p[2]);
                    // fields [E_X, E_Y, H_Z]; axes 1 = t, 2 = x, 3 = y
                    let dl = Derivs2d {
                        ex_t: g(1, 0),
                        ex_y: g(3, 0),
                        ey_t: g(1, 1),
                        ey_x: g(2, 1),
                        hz_t: g(1, 2),
                        hz_x: g(2, 2),
                        hz_y: g(3, 2),
                    };
                    let rh = residual_2d(&dh, mu, eps);
                    let rl = residual_2d(&dl, mu, eps);
                    let flat = |d: &Derivs2d<f64>| {
                        vec![d.ex_t, d.ex_y, d.ey_t, d.ey_x, d.hz_t, d.hz_x, d.hz_y]
                    };
                    (
                        v.to_vec(),
                        rl.r_ax.abs().max(rl.r_ay.abs()).max(rl.r_far.abs()),
                        rh.r_ax.abs().max(rh.r_ay.abs()).max(rh.r_far.abs()),
                        flat(&dh),
                        flat(&dl),
                    )
                }
            };
            for (f, h) in hand.iter().enumerate() {
                r.max_mismatch = r.max_mismatch.max((g(0, f) - h).abs());
            }
            for (a, b) in hand_flat.iter().zip(&lib_flat) {
                r.max_mismatch = r.max_mismatch.max((a - b).abs());
            }
            r.max_hand_residual = r.max_hand_residual.max(hand_res);
            r.max_library_residual = r.max_library_residual.max(lib_res);
        }
    }
    r
}

/// Largest interface jump of the library's closed form, with tangential
/// components compared directly and the normal one weighted by `eps`.
pub fn max_interface_jump(dim: Dimension, n: usize, seed: u64) -> f64 {
    let case = AnalyticCase::for_dimension(dim);
    let params = benchmark_params(dim);
    let mut worst: f64 = 0.0;
    for p in interface_points(dim, n, seed) {
        let a = case.fields_on(Side::One, &p);
        let b = case.fields_on(Side::Two, &p);
        let jumps: Vec<f64> = match dim {
            Dimension::One => vec![a[0] - b[0], a[1] - b[1]],
            Dimension::Two => vec![
                params.eps1 * a[0] - params.eps2 * b[0],
                a[1] - b[1],
                a[2] - b[2],
            ],
        };
        for j in jumps {
            worst = worst.max(j.abs());
        }
    }
    worst
}
