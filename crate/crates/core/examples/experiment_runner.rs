//! Runs a JSON experiment description and prints the comparison table.
//!
//! `cargo run --release --example experiment_runner -- config.json`
//!
//! Without an argument a tiny built-in configuration is used.

use dapinn::experiment::{parse_config, render_run, report, run};

const TINY: &str = r#"{
    "case": "maxwell1d",
    "mode": "both",
    "data": {"n": 200},
    "collocation": {"n_p1": 200, "n_p2": 200, "n_i": 50},
    "train": {"iterations": 50, "architecture": {"hidden": [16, 16]}},
    "grid": {"nt": 21, "nx": 21}
}"#;

fn main() {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path).expect("readable config"),
        None => TINY.to_string(),
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    if std::env::args().nth(1).is_none() {
        config.out = std::env::temp_dir().join("dapinn-runner");
    }
    let arts = run(&config).unwrap();
    for a in &arts {
        print!("{}", render_run(a));
    }
    let dirs: Vec<_> = arts.iter().map(|a| a.dir.clone()).collect();
    print!("{}", report(&dirs).unwrap().render());
}
