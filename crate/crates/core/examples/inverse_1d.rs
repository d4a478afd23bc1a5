//! Recovers the 1D material parameters and interface from synthetic data,
//! using the `paper-1d` preset.
//!
//! `cargo run --release --example inverse_1d -- [iterations] [out-dir]`

use std::path::PathBuf;

use dapinn::experiment::{preset, render_run, run};

fn main() {
    let mut args = std::env::args().skip(1);
    let mut config = preset("paper-1d").unwrap();
    if let Some(k) = args.next() {
        config.train.iterations = k.parse().expect("iterations");
    } else {
        config.train.iterations = 500;
    }
    config.out = args.next().map_or_else(
        || std::env::temp_dir().join("dapinn-inverse-1d"),
        PathBuf::from,
    );
    for a in run(&config).unwrap() {
        let recs = &a.metrics;
        print!("{}", render_run(&a));
        println!(
            "Loss_I peak {:.3e}, final {:.3e}",
            recs.loss_i_peak, recs.loss_i_final
        );
    }
}
