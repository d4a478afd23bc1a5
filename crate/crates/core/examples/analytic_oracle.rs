//! The two closed-form benchmarks: field values, PDE residuals through
//! forward tangents, interface jumps, and a synthetic dataset.

use dapinn::analytic::{generate_dataset, AnalyticCase};
use dapinn::autodiff::{Dual, Matrix, Tape};
use dapinn::physics::{residual_1d, residual_2d, Derivs1d, Derivs2d, Dimension, Side};

/// `(values, d/dcoord_k for each k)` of one medium's formula at `p`.
fn partials(case: &AnalyticCase, side: Side, p: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let values = case.fields_on(side, p);
    let derivs = (0..p.len())
        .map(|k| {
            let tape = Tape::new();
            let coords: Vec<Dual<'_>> = p
                .iter()
                .enumerate()
                .map(|(j, &c)| {
                    let v = tape.constant(Matrix::scalar(c));
                    if j == k {
                        Dual::seeded(v)
                    } else {
                        Dual::constant(v)
                    }
                })
                .collect();
            case.fields_on(side, &coords)
                .iter()
                .map(|f| f.tangent_or_zero().item())
                .collect()
        })
        .collect();
    (values, derivs)
}

fn main() {
    for dim in [Dimension::One, Dimension::Two] {
        let case = AnalyticCase::for_dimension(dim);
        let params = case.true_params();
        println!("{dim:?}: true parameters {:?}", params.to_array());
        let probes: Vec<Vec<f64>> = match dim {
            Dimension::One => vec![vec![2.0, 4.0], vec![7.5, 16.0]],
            Dimension::Two => vec![vec![0.3, 1.0, 2.0], vec![1.7, 5.0, 4.0]],
        };
        for p in probes {
            let side = Side::of(p[1], params.d);
            let (mu, eps) = params.side(side);
            let (u, g) = partials(&case, side, &p);
            // g[axis][field]; axes are (t, x[, y])
            let r = match dim {
                Dimension::One => {
                    let d = Derivs1d {
                        ey_x: g[1][0],
                        ey_t: g[0][0],
                        hz_x: g[1][1],
                        hz_t: g[0][1],
                    };
                    residual_1d(&d, mu, eps).squared_norm()
                }
                Dimension::Two => {
                    let d = Derivs2d {
                        ex_t: g[0][0],
                        ex_y: g[2][0],
                        ey_t: g[0][1],
                        ey_x: g[1][1],
                        hz_t: g[0][2],
                        hz_x: g[1][2],
                        hz_y: g[2][2],
                    };
                    residual_2d(&d, mu, eps).squared_norm()
                }
            };
            println!("  at {p:?} ({side:?}): fields {u:.6?}, squared residual {r:.2e}");
        }
        let mut on_plane: Vec<f64> = case
            .geometry()
            .upper_bounds()
            .iter()
            .map(|u| u / 3.0)
            .collect();
        on_plane[1] = params.d;
        let a = case.fields_on(Side::One, &on_plane);
        let b = case.fields_on(Side::Two, &on_plane);
        println!("  interface {on_plane:.4?}: side 1 {a:.6?} side 2 {b:.6?}");

        let data = generate_dataset(&case, 5, 1, 0.0).unwrap();
        let mut csv = Vec::new();
        data.write_csv(&mut csv).unwrap();
        print!("{}", String::from_utf8(csv).unwrap());
    }
}
