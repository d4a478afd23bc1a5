//! How the data split and the collocation sets follow the interface
//! estimate `d` during training.

use dapinn::analytic::{generate_dataset, AnalyticCase};
use dapinn::physics::Dimension;
use dapinn::sampler::{SampleBatch, SamplerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let case = AnalyticCase::for_dimension(Dimension::One);
    let geometry = case.geometry();
    let data = generate_dataset(&case, 400, 1, 0.0).unwrap();
    let config = SamplerConfig {
        n_data: 400,
        n_p1: 200,
        n_p2: 200,
        n_i: 50,
        seed: 1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!(
        "{:>6} {:>6} {:>6} {:>10} {:>10} {:>10}",
        "d", "|D1|", "|D2|", "max x P1", "min x P2", "x on I"
    );
    for d in [15.0, 13.0, 11.0, 10.0, 2.0] {
        let b = SampleBatch::new(&data.points, d, &geometry, &config, &mut rng).unwrap();
        let x1 = b.p1.x(d, b.x_max);
        let x2 = b.p2.x(d, b.x_max);
        let xi = b.interface.x(d, b.x_max);
        println!(
            "{:>6.1} {:>6} {:>6} {:>10.4} {:>10.4} {:>10.4}",
            d,
            b.data1.len(),
            b.data2.len(),
            x1.iter().cloned().fold(f64::MIN, f64::max),
            x2.iter().cloned().fold(f64::MAX, f64::min),
            xi[0],
        );
        assert!(b.violation().is_none());
    }
    // the same uniform draws move with d
    let b = SampleBatch::new(&data.points, 12.0, &geometry, &config, &mut rng).unwrap();
    println!(
        "first P1 point at d = 12: {:?}",
        b.p1.coords(12.0, b.x_max)[0]
    );
    println!(
        "same draw at d = 6:       {:?}",
        b.p1.coords(6.0, b.x_max)[0]
    );
}
