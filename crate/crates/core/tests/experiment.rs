use std::fs;
use std::path::Path;

use dapinn::analytic::{l2_relative_error, GridSpec};
use dapinn::experiment::{
    export_error_grid, load_run, parse_config, preset, read_params, report, run, ExperimentConfig,
    ExperimentError, Metrics, ModeSelection, PRESETS, REQUIRED_ARTIFACTS,
};
use dapinn::trainer::{Checkpoint, TrainTrace};

fn small(case: &str, out: &Path, extra: &str) -> ExperimentConfig {
    let grid = if case == "maxwell1d" {
        r#"{"nt": 7, "nx": 9}"#
    } else {
        r#"{"nx": 5, "ny": 6, "t_slices": [0.5, 1.0]}"#
    };
    let text = format!(
        r#"{{"case": "{case}", "seed": 4, "out": {out:?},
            "data": {{"n": 40}},
            "collocation": {{"n_p1": 20, "n_p2": 20, "n_i": 10}},
            "train": {{"iterations": 4, "threads": 1, "architecture": {{"hidden": [6, 6]}}}},
            "grid": {grid}{extra}}}"#
    );
    parse_config(&text).unwrap()
}

#[test]
fn presets_resolve_and_validate() {
    for name in PRESETS {
        preset(name).unwrap().validate().unwrap();
    }
    let c = parse_config(r#"{"case": "maxwell1d"}"#).unwrap();
    assert_eq!(c.preset, "paper-1d");
    assert_eq!(c.data.n, 2000);
    assert_eq!(
        (c.collocation.n_p1, c.collocation.n_p2, c.collocation.n_i),
        (4000, 4000, 2000)
    );
    assert_eq!(c.train.architecture.hidden, vec![30; 5]);
    let c = parse_config(r#"{"case": "maxwell2d"}"#).unwrap();
    assert_eq!(c.preset, "paper-2d");
    assert_eq!(c.train.architecture.hidden, vec![50; 8]);
}

#[test]
fn missing_case_is_an_error() {
    let e = parse_config(r#"{"seed": 1}"#).unwrap_err().to_string();
    assert!(e.contains("case"), "{e}");
    assert!(parse_config(r#"{"case": "maxwell3d"}"#).is_err());
    let e = parse_config(r#"{"case": "maxwell1d", "preset": "paper-2d"}"#)
        .unwrap_err()
        .to_string();
    assert!(e.contains("maxwell2d"), "{e}");
}

#[test]
fn unknown_keys_get_a_suggestion() {
    let e = parse_config(r#"{"case": "maxwell1d", "train": {"learning_rat": 0.01}}"#)
        .unwrap_err()
        .to_string();
    assert!(
        e.contains("learning_rat") && e.contains("learning_rate"),
        "{e}"
    );
    let e = parse_config(r#"{"case": "maxwell1d", "colocation": {}}"#)
        .unwrap_err()
        .to_string();
    assert!(e.contains("collocation"), "{e}");
}

#[test]
fn invalid_values_are_rejected() {
    for bad in [
        r#"{"case": "maxwell1d", "train": {"learning_rate": -1.0}}"#,
        r#"{"case": "maxwell1d", "collocation": {"n_i": 0}}"#,
        r#"{"case": "maxwell1d", "data": {"noise_sd": -0.1}}"#,
        r#"{"case": "maxwell1d", "grid": {"nt": 1}}"#,
    ] {
        assert!(
            matches!(parse_config(bad), Err(ExperimentError::Config(_))),
            "{bad}"
        );
    }
}

#[test]
fn run_writes_every_artifact_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = small("maxwell1d", &tmp.path().join("a"), "");
    let b = small("maxwell1d", &tmp.path().join("b"), "");
    let ra = run(&a).unwrap();
    let rb = run(&b).unwrap();
    assert_eq!(ra.len(), 1);
    let dir = &ra[0].dir;
    for f in REQUIRED_ARTIFACTS {
        assert!(dir.join(f).is_file(), "{f}");
    }
    assert!(dir.join("timing.json").is_file());
    assert!(dir.join("error_E_Y.csv").is_file());
    assert!(dir.join("error_H_Z.csv").is_file());
    let m = |d: &Path| -> Metrics {
        serde_json::from_str(&fs::read_to_string(d.join("metrics.json")).unwrap()).unwrap()
    };
    assert_eq!(m(dir), m(&rb[0].dir));
    assert_eq!(m(dir), ra[0].metrics);
    let trace = fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert_eq!(
        trace.lines().next().unwrap(),
        "iter,loss_d,loss_p,loss_i,total,mu1,eps1,mu2,eps2,d,ms"
    );
    assert_eq!(trace.lines().count(), 5);
    assert_eq!(
        fs::read_to_string(dir.join("dataset.csv")).unwrap(),
        fs::read_to_string(rb[0].dir.join("dataset.csv")).unwrap()
    );
}

#[test]
fn params_table_matches_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small("maxwell1d", tmp.path(), "");
    run(&cfg).unwrap();
    let ck =
        Checkpoint::from_json(&fs::read_to_string(tmp.path().join("checkpoint.json")).unwrap())
            .unwrap();
    let truth = [1.0, 1.0, 9.0, 1.0, 10.0];
    let rows = read_params(&tmp.path().join("params.csv")).unwrap();
    assert_eq!(rows.len(), 5);
    for ((row, est), t) in rows.iter().zip(ck.lambda.to_array()).zip(truth) {
        assert!((row.estimate - est).abs() <= 1e-12 * est.abs().max(1.0));
        assert_eq!(row.truth, t);
        let pct = 100.0 * l2_relative_error(&[t], &[est]).unwrap();
        assert!((row.rel_error_pct - pct).abs() <= 1e-12 * pct.max(1.0));
    }
}

#[test]
fn both_modes_write_separate_dirs_and_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small("maxwell1d", tmp.path(), "");
    cfg.mode = ModeSelection::Both;
    let arts = run(&cfg).unwrap();
    assert_eq!(arts.len(), 2);
    assert!(tmp.path().join("da-pinn/checkpoint.json").is_file());
    assert!(tmp.path().join("baseline/checkpoint.json").is_file());
    let csv = fs::read_to_string(tmp.path().join("comparison.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "run,method,field,l2_error,best"
    );
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(csv.matches(",true").count(), 2);
    // the baseline never moves d
    let (_, base) = load_run(&tmp.path().join("baseline")).unwrap();
    assert_eq!(base.lambda.d, cfg.train.initial.d);
}

#[test]
fn report_round_trips_stored_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small("maxwell1d", tmp.path(), "");
    let arts = run(&cfg).unwrap();
    let r = report(&[tmp.path().to_path_buf()]).unwrap();
    assert_eq!(r.rows.len(), 2);
    for (row, (field, err)) in r.rows.iter().zip(&arts[0].metrics.field_errors) {
        assert_eq!(&row.field, field);
        assert_eq!(row.l2_error, *err);
        assert!(row.best);
    }
    assert!(r.render().contains("E_Y"));
}

#[test]
fn report_rejects_incomplete_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("config.json"), "{}").unwrap();
    match report(&[tmp.path().to_path_buf()]) {
        Err(ExperimentError::Incomplete { missing, .. }) => {
            assert!(missing.contains(&"checkpoint.json".to_string()));
            assert!(!missing.contains(&"config.json".to_string()));
        }
        other => panic!("{other:?}"),
    }
    assert!(report(&[]).is_err());
}

#[test]
fn export_grid_dimensions_and_unknown_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small("maxwell1d", tmp.path(), "");
    run(&cfg).unwrap();
    let grid = GridSpec {
        nt: 4,
        nx: 3,
        ..cfg.grid.clone()
    };
    let out = export_error_grid(tmp.path(), "H_Z", &grid).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].0, "error_H_Z.csv");
    let lines: Vec<&str> = out[0].1.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().all(|l| l.split(',').count() == 4));
    assert!(lines[1..]
        .iter()
        .flat_map(|l| l.split(',').skip(1))
        .all(|v| v.parse::<f64>().unwrap() >= 0.0));
    match export_error_grid(tmp.path(), "E_Z", &grid) {
        Err(ExperimentError::UnknownField { name, available }) => {
            assert_eq!(name, "E_Z");
            assert_eq!(available, "E_Y, H_Z");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn two_d_run_writes_slice_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small("maxwell2d", tmp.path(), "");
    let arts = run(&cfg).unwrap();
    assert_eq!(arts[0].metrics.field_errors.len(), 3);
    for f in ["E_X", "E_Y", "H_Z"] {
        for t in ["0.5", "1"] {
            let p = tmp.path().join(format!("error_{f}_t{t}.csv"));
            let s = fs::read_to_string(&p).unwrap();
            assert_eq!(s.lines().count(), 6, "{}", p.display());
            assert!(s.lines().all(|l| l.split(',').count() == 7));
        }
    }
    let trace =
        TrainTrace::read_csv(fs::File::open(tmp.path().join("trace.csv")).unwrap()).unwrap();
    assert_eq!(trace.len(), 4);
}

#[test]
fn dataset_can_be_loaded_from_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let first = small("maxwell1d", &tmp.path().join("first"), "");
    run(&first).unwrap();
    let path = tmp.path().join("first/dataset.csv");
    let extra = format!(r#", "mode": "baseline", "data": {{"n": 1, "path": {path:?}}}"#);
    let second = small("maxwell1d", &tmp.path().join("second"), &extra);
    run(&second).unwrap();
    assert_eq!(
        fs::read_to_string(&path).unwrap(),
        fs::read_to_string(tmp.path().join("second/dataset.csv")).unwrap()
    );
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        parse_config(&fs::read_to_string(&path).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 3);
}
