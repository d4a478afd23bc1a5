//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//! `cargo test --release --test acceptance [-- 1 2 6]` runs a subset.
//! Run directories are kept under the cargo target tmp dir.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::gradients::{input_jacobian_report, primitive_reports, tangent_weight_report};
use common::oracle::{compare_oracle, max_interface_jump};
use common::{dataset, full_loss_gradcheck, tiny_config, tiny_sampler};
use dapinn::analytic::{l2_relative_error, uniform_point, AnalyticCase, AnalyticError};
use dapinn::experiment::{preset, read_params, run, ExperimentConfig, ModeSelection, RunArtifacts};
use dapinn::network::Activation;
use dapinn::physics::{CaseGeometry, Dimension};
use dapinn::sampler::{SampleBatch, SamplerConfig};
use dapinn::trainer::{train, Checkpoint, Mode, TrainTrace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn work_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"))
        .join("acceptance")
        .join(name);
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn check(ok: bool, summary: String) -> Outcome {
    if ok {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn analytic_oracle() -> Outcome {
    let mut worst_res: f64 = 0.0;
    let mut worst_mismatch: f64 = 0.0;
    let mut worst_jump: f64 = 0.0;
    for dim in [Dimension::One, Dimension::Two] {
        let r = compare_oracle(dim, 1000, 2024);
        worst_res = worst_res
            .max(r.max_library_residual)
            .max(r.max_hand_residual);
        worst_mismatch = worst_mismatch.max(r.max_mismatch);
        worst_jump = worst_jump.max(max_interface_jump(dim, 200, 2025));
    }
    check(
        worst_res <= 1e-12 && worst_jump <= 1e-12 && worst_mismatch <= 1e-12,
        format!(
            "max residual {worst_res:.2e}, max interface jump {worst_jump:.2e}, \
             closed form vs hand derivation {worst_mismatch:.2e}"
        ),
    )
}

fn gradient_suite() -> Outcome {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut note = |name: String, r: dapinn::autodiff::GradCheckReport| {
        worst = worst.max(r.max_relative_error);
        count += r.entries.len();
        if !r.passed() {
            failures.push(name);
        }
    };
    for (name, r) in primitive_reports() {
        note(name, r);
    }
    for act in [Activation::Tanh, Activation::Relu] {
        note(
            format!("input Jacobian {act:?}"),
            input_jacobian_report(act),
        );
        note(
            format!("tangent weights {act:?}"),
            tangent_weight_report(act),
        );
    }
    for (mode, dim) in [
        (Mode::DaPinn, Dimension::One),
        (Mode::DaPinn, Dimension::Two),
        (Mode::Baseline, Dimension::One),
    ] {
        note(
            format!("full loss {mode:?} {dim:?}"),
            full_loss_gradcheck(mode, dim, 1e-5),
        );
    }
    check(
        failures.is_empty(),
        format!("{count} entries, max relative error {worst:.2e}; failed: {failures:?}"),
    )
}

fn param_errors(a: &RunArtifacts) -> Vec<(String, f64)> {
    a.metrics
        .params
        .iter()
        .map(|p| (p.name.clone(), p.rel_error_pct / 100.0))
        .collect()
}

fn recovery_1d() -> Outcome {
    let mut cfg = preset("paper-1d").unwrap();
    cfg.out = work_dir("recovery-1d");
    let arts = run(&cfg).map_err(|e| e.to_string())?;
    let a = &arts[0];
    let errs = param_errors(a);
    let params_ok = errs
        .iter()
        .all(|(n, e)| *e <= if n == "d" { 0.01 } else { 0.02 });
    let fields_ok = a.metrics.field_errors.iter().all(|(_, e)| *e <= 5e-3);
    let trace = TrainTrace::read_csv(fs::File::open(a.dir.join("trace.csv")).unwrap())
        .map_err(|e| e.to_string())?;
    let peak = trace.records.iter().map(|r| r.loss_i).fold(0.0, f64::max);
    let last = trace.records.last().map_or(f64::NAN, |r| r.loss_i);
    let drop = peak / last;
    check(
        params_ok && fields_ok && drop >= 100.0 && a.seconds <= 1800.0,
        format!(
            "{} iterations in {:.0} s; lambda rel errors {}; field l2 {}; Loss_I peak/final {drop:.1e}",
            a.metrics.iterations,
            a.seconds,
            fmt_errs(&errs),
            fmt_errs(&a.metrics.field_errors),
        ),
    )
}

fn fmt_errs(errs: &[(String, f64)]) -> String {
    errs.iter()
        .map(|(n, e)| format!("{n} {e:.2e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Iterations per method and seed in the comparison; both methods get the
/// same data, collocation counts and iteration budget.
const COMPARISON_ITERATIONS: usize = 8000;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn comparison() -> Outcome {
    let start = Instant::now();
    let root = work_dir("comparison");
    let mut errors: Vec<(Mode, String, f64)> = Vec::new();
    for seed in 1..=3 {
        let mut cfg = preset("paper-1d").unwrap();
        cfg.mode = ModeSelection::Both;
        cfg.seed = seed;
        cfg.train.iterations = COMPARISON_ITERATIONS;
        cfg.out = root.join(format!("seed{seed}"));
        for a in run(&cfg).map_err(|e| e.to_string())? {
            for (f, e) in &a.metrics.field_errors {
                errors.push((a.metrics.mode, f.clone(), *e));
            }
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    let mut ok = seconds <= 3600.0;
    let mut parts = Vec::new();
    for field in ["E_Y", "H_Z"] {
        let med = |m: Mode| {
            median(
                errors
                    .iter()
                    .filter(|(mm, f, _)| *mm == m && f == field)
                    .map(|e| e.2)
                    .collect(),
            )
        };
        let (da, base) = (med(Mode::DaPinn), med(Mode::Baseline));
        ok &= da < base;
        parts.push(format!(
            "{field} median da-pinn {da:.3e} vs baseline {base:.3e}"
        ));
    }
    check(
        ok,
        format!(
            "3 seeds x {COMPARISON_ITERATIONS} iterations in {seconds:.0} s; {}",
            parts.join("; ")
        ),
    )
}

fn recovery_2d() -> Outcome {
    let mut cfg: ExperimentConfig = preset("desk-2d").unwrap();
    cfg.out = work_dir("recovery-2d");
    let arts = run(&cfg).map_err(|e| e.to_string())?;
    let a = &arts[0];
    let errs = param_errors(a);
    let params_ok = errs.iter().all(|(_, e)| *e <= 0.05);
    let fields_ok = a.metrics.field_errors.iter().all(|(_, e)| *e <= 3e-2);
    check(
        params_ok && fields_ok && a.seconds <= 7200.0,
        format!(
            "{} iterations in {:.0} s; lambda rel errors {}; field l2 {}",
            a.metrics.iterations,
            a.seconds,
            fmt_errs(&errs),
            fmt_errs(&a.metrics.field_errors),
        ),
    )
}

fn sampler_and_determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut violations = Vec::new();
    let trials = 10_000;
    for trial in 0..trials {
        let dim = if trial % 2 == 0 {
            Dimension::One
        } else {
            Dimension::Two
        };
        let case = AnalyticCase::for_dimension(dim);
        let geo: CaseGeometry = case.geometry();
        let n = rng.random_range(1..12);
        let data: Vec<_> = (0..n)
            .map(|_| {
                let coords = uniform_point(&geo, &mut rng);
                dapinn::analytic::DataPoint {
                    fields: case.eval(&coords).unwrap(),
                    coords,
                }
            })
            .collect();
        let d = rng.random_range(0.001..0.999) * geo.x_max;
        let cfg = SamplerConfig {
            n_data: n,
            n_p1: rng.random_range(1..20),
            n_p2: rng.random_range(1..20),
            n_i: rng.random_range(1..8),
            seed: trial,
        };
        let batch = SampleBatch::new(&data, d, &geo, &cfg, &mut rng).unwrap();
        let sizes_ok = batch.data1.len() + batch.data2.len() == n
            && batch.p1.len() == cfg.n_p1
            && batch.p2.len() == cfg.n_p2
            && batch.interface.len() == cfg.n_i;
        if let Some(v) = batch.violation() {
            violations.push(v);
        } else if !sizes_ok {
            violations.push(format!("trial {trial}: set sizes"));
        }
    }
    let mut identical = true;
    for (mode, dim) in [
        (Mode::DaPinn, Dimension::One),
        (Mode::Baseline, Dimension::Two),
    ] {
        let (_, data) = dataset(dim, 700, 8);
        let geo = AnalyticCase::for_dimension(dim).geometry();
        let mut sampler = tiny_sampler(8);
        sampler.n_p1 = 600;
        sampler.n_p2 = 600;
        sampler.n_i = 600;
        let traces: Vec<Vec<_>> = [1, 4]
            .iter()
            .map(|&threads| {
                let mut cfg = tiny_config(mode, dim, Activation::Tanh);
                cfg.threads = threads;
                cfg.iterations = 5;
                let t = train(&cfg, &sampler, &data.points, &geo).unwrap();
                t.trace.records.iter().map(|r| r.untimed()).collect()
            })
            .collect();
        identical &= traces[0] == traces[1];
    }
    check(
        violations.is_empty() && identical,
        format!(
            "{trials} sampler trials, {} violations {:?}; 1 vs 4 threads bit-identical: {identical}",
            violations.len(),
            violations.first()
        ),
    )
}

fn metric_exactness() -> Outcome {
    let units = [
        l2_relative_error(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).ok() == Some(0.0),
        l2_relative_error(&[3.0, 4.0], &[0.0, 0.0]).ok() == Some(1.0),
        l2_relative_error(&[2.0], &[3.0]).ok() == Some(0.5),
        matches!(
            l2_relative_error(&[0.0], &[1.0]),
            Err(AnalyticError::ZeroNorm)
        ),
    ];
    let dir = work_dir("metrics");
    let cfg = dapinn::experiment::parse_config(&format!(
        r#"{{"case": "maxwell1d", "out": {dir:?}, "data": {{"n": 50}},
            "collocation": {{"n_p1": 30, "n_p2": 30, "n_i": 10}},
            "train": {{"iterations": 20, "architecture": {{"hidden": [8, 8]}}}},
            "grid": {{"nt": 5, "nx": 5}}}}"#
    ))
    .map_err(|e| e.to_string())?;
    run(&cfg).map_err(|e| e.to_string())?;
    let ck = Checkpoint::from_json(&fs::read_to_string(dir.join("checkpoint.json")).unwrap())
        .map_err(|e| e.to_string())?;
    let truth = AnalyticCase::for_dimension(Dimension::One).true_params();
    let rows = read_params(&dir.join("params.csv")).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for ((row, est), t) in rows.iter().zip(ck.lambda.to_array()).zip(truth.to_array()) {
        let pct = 100.0 * l2_relative_error(&[t], &[est]).unwrap();
        worst = worst.max((row.rel_error_pct - pct).abs() / pct.abs().max(1e-300));
        worst = worst.max((row.estimate - est).abs() / est.abs());
    }
    check(
        units.iter().all(|&u| u) && rows.len() == 5 && worst <= 1e-12,
        format!(
            "unit cases {}/{}; params.csv vs checkpoint max relative difference {worst:.1e}",
            units.iter().filter(|&&u| u).count(),
            units.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("analytic oracle", analytic_oracle),
        ("gradient suite", gradient_suite),
        ("1D recovery", recovery_1d),
        ("da-pinn vs baseline", comparison),
        ("2D recovery", recovery_2d),
        ("sampler and determinism", sampler_and_determinism),
        ("metric exactness", metric_exactness),
    ];
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, msg) = match outcome {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("{tag} {n} {name} ({secs:.1} s): {msg}");
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
