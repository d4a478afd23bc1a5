//! Finite-difference checks of every tape primitive and of network
//! Jacobians, shared by the unit-level tests and the acceptance run.

use dapinn::autodiff::{
    central_difference, compare_gradients, GradCheckConfig, GradCheckReport, Matrix, Tape, Var,
    NAMED_OPS,
};
use dapinn::network::{init_network, Activation, InputScaling, NetworkParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOLERANCE: f64 = 1e-5;

pub fn config() -> GradCheckConfig {
    GradCheckConfig {
        step: 1e-6,
        tolerance: TOLERANCE,
        floor: 1e-3,
    }
}

/// Entries bounded away from zero so `relu`/`step` kinks and `div` poles
/// stay out of the finite-difference stencil.
fn away_from_zero(rows: usize, cols: usize, positive: bool, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let m = rng.random_range(0.2..1.5);
        if positive || rng.random::<bool>() {
            m
        } else {
            -m
        }
    })
}

/// Second-operand shapes exercised for each binary op: same shape, row,
/// column and scalar broadcasts.
fn partner_shapes(op: &str) -> Vec<(usize, usize)> {
    if op == "matmul_t" {
        vec![(2, 4), (1, 4)]
    } else {
        vec![(3, 4), (1, 4), (3, 1), (1, 1)]
    }
}

/// Checks `sum(W * f(leaves))` for a fixed random weighting `W`, so every
/// output entry contributes a distinct adjoint.
fn check_program(
    label: &str,
    leaves: &[Matrix],
    f: &dyn for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
    seed: u64,
) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out_shape = {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = leaves.iter().map(|m| tape.constant(m.clone())).collect();
        f(&tape, &vars).shape()
    };
    let weights = Matrix::from_fn(out_shape.0, out_shape.1, |_, _| rng.random_range(-1.0..1.0));
    let eval = |mats: &[Matrix]| -> (f64, Vec<f64>) {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = mats
            .iter()
            .enumerate()
            .map(|(i, m)| tape.leaf(format!("a{i}"), m.clone()))
            .collect();
        let y = (f(&tape, &vars) * tape.constant(weights.clone())).sum();
        let g = y.backward().unwrap();
        let flat = (0..mats.len())
            .flat_map(|i| g.get(&format!("a{i}")).unwrap().as_slice().to_vec())
            .collect();
        (y.item(), flat)
    };
    let (_, analytic) = eval(leaves);
    let sizes: Vec<(usize, usize)> = leaves.iter().map(|m| m.shape()).collect();
    let unflatten = |p: &[f64]| -> Vec<Matrix> {
        let mut off = 0;
        sizes
            .iter()
            .map(|&(r, c)| {
                let m = Matrix::from_vec(r, c, p[off..off + r * c].to_vec());
                off += r * c;
                m
            })
            .collect()
    };
    let point: Vec<f64> = leaves.iter().flat_map(|m| m.as_slice().to_vec()).collect();
    let cfg = config();
    let numeric = central_difference(|p| eval(&unflatten(p)).0, &point, cfg.step);
    let names: Vec<String> = (0..point.len()).map(|i| format!("{label}[{i}]")).collect();
    compare_gradients(&names, &analytic, &numeric, &cfg)
}

/// One report per primitive (and per broadcast pattern of binary ops),
/// plus the structural ops `scale`, `offset`, `col` and `hcat`.
pub fn primitive_reports() -> Vec<(String, GradCheckReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut out = Vec::new();
    for (k, &(op, arity)) in NAMED_OPS.iter().enumerate() {
        let a = away_from_zero(3, 4, false, &mut rng);
        if arity == 1 {
            let r = check_program(op, &[a], &|t, v| t.apply(op, &[v[0]]).unwrap(), k as u64);
            out.push((op.to_string(), r));
            continue;
        }
        for (r, c) in partner_shapes(op) {
            let b = away_from_zero(r, c, op == "div", &mut rng);
            let label = format!("{op} 3x4 . {r}x{c}");
            let rep = check_program(
                &label,
                &[a.clone(), b],
                &|t, v| t.apply(op, &[v[0], v[1]]).unwrap(),
                k as u64,
            );
            out.push((label, rep));
        }
    }
    let a = away_from_zero(3, 4, false, &mut rng);
    let b = away_from_zero(3, 2, false, &mut rng);
    out.push((
        "scale".into(),
        check_program(
            "scale",
            std::slice::from_ref(&a),
            &|_, v| v[0].scale(-2.5),
            90,
        ),
    ));
    out.push((
        "offset".into(),
        check_program(
            "offset",
            std::slice::from_ref(&a),
            &|_, v| v[0].offset(0.75).square(),
            91,
        ),
    ));
    out.push((
        "col".into(),
        check_program("col", std::slice::from_ref(&a), &|_, v| v[0].col(2), 92),
    ));
    out.push((
        "hcat".into(),
        check_program("hcat", &[a, b], &|t, v| t.hcat(&[v[1], v[0], v[1]]), 93),
    ));
    out
}

pub fn sample_network(activation: Activation, seed: u64) -> NetworkParams {
    init_network(&[3, 8, 8, 3], activation, seed)
        .unwrap()
        .with_scaling(InputScaling::new(vec![0.0; 3], vec![2.0, 6.0, 6.0]))
}

fn sample_inputs(n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(n, 3, |_, j| rng.random_range(0.0..[2.0, 6.0, 6.0][j]))
}

/// Propagated input Jacobians against central differences of the plain
/// forward pass.
pub fn input_jacobian_report(activation: Activation) -> GradCheckReport {
    let net = sample_network(activation, 5);
    let x = sample_inputs(6, 6);
    let cfg = config();
    let (mut names, mut analytic, mut numeric) = (Vec::new(), Vec::new(), Vec::new());
    for r in 0..x.rows() {
        let p = x.row_slice(r).to_vec();
        let (_, jac) = net.forward_with_derivatives(&p).unwrap();
        for (o, row) in jac.iter().enumerate() {
            let fd = central_difference(|q| net.forward(q).unwrap().as_slice()[o], &p, cfg.step);
            for (j, (&a, &n)) in row.iter().zip(&fd).enumerate() {
                names.push(format!("point {r} du{o}/dx{j}"));
                analytic.push(a);
                numeric.push(n);
            }
        }
    }
    compare_gradients(&names, &analytic, &numeric, &cfg)
}

/// Weight gradients of a loss built from outputs and their input tangents,
/// i.e. the mixed derivatives the physics loss relies on.
pub fn tangent_weight_report(activation: Activation) -> GradCheckReport {
    let net = sample_network(activation, 8);
    let x = sample_inputs(7, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let weights: Vec<Matrix> = (0..4)
        .map(|_| Matrix::from_fn(7, 3, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let loss = |n: &NetworkParams| -> (f64, Vec<f64>) {
        let tape = Tape::new();
        let vars = n.register(&tape, "net");
        let input = tape.constant(x.clone());
        let (u, tangents) = vars.forward_with_tangents(input, &[0, 1, 2]);
        let mut y = (u * tape.constant(weights[0].clone())).sum();
        for (t, w) in tangents.iter().zip(&weights[1..]) {
            y = y + (t.square() * tape.constant(w.clone())).sum();
        }
        let g = y.backward().unwrap();
        (y.item(), vars.flat_gradient(&g))
    };
    let flat = net.to_flat();
    let (_, analytic) = loss(&net);
    let cfg = config();
    let numeric = central_difference(
        |p| {
            let mut n = net.clone();
            n.set_flat(p);
            loss(&n).0
        },
        &flat,
        cfg.step,
    );
    let names: Vec<String> = (0..flat.len()).map(|i| format!("theta[{i}]")).collect();
    compare_gradients(&names, &analytic, &numeric, &cfg)
}
