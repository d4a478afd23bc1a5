//! Interface-adaptive training against a single network on the same budget.
//!
//! `cargo run --release --example baseline_comparison -- [iterations] [seeds]`

use dapinn::experiment::{preset, report, run, ModeSelection};

fn main() {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().map_or(300, |k| k.parse().expect("iterations"));
    let seeds: u64 = args.next().map_or(1, |k| k.parse().expect("seeds"));
    let root = std::env::temp_dir().join("dapinn-comparison");
    let mut dirs = Vec::new();
    for seed in 1..=seeds {
        let mut config = preset("paper-1d").unwrap();
        config.mode = ModeSelection::Both;
        config.seed = seed;
        config.train.iterations = iterations;
        config.out = root.join(format!("seed{seed}"));
        for a in run(&config).unwrap() {
            dirs.push(a.dir);
        }
    }
    print!("{}", report(&dirs).unwrap().render());
}
