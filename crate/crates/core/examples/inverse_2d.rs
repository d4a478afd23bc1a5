//! Two-dimensional TE recovery at reduced (`desk-2d`) scale.
//!
//! `cargo run --release --example inverse_2d -- [iterations] [out-dir]`

use std::path::PathBuf;

use dapinn::experiment::{preset, render_run, run};

fn main() {
    let mut args = std::env::args().skip(1);
    let mut config = preset("desk-2d").unwrap();
    config.train.iterations = args.next().map_or(200, |k| k.parse().expect("iterations"));
    config.out = args.next().map_or_else(
        || std::env::temp_dir().join("dapinn-inverse-2d"),
        PathBuf::from,
    );
    // d starts outside the box and is clamped back in on the first iteration
    println!("initial lambda {:?}", config.train.initial.to_array());
    for a in run(&config).unwrap() {
        print!("{}", render_run(&a));
    }
}
