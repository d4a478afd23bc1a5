//! Input Jacobian of a small network, propagated alongside the forward pass
//! and compared with central differences.

use dapinn::autodiff::central_difference;
use dapinn::network::{init_network, Activation, InputScaling};

fn main() {
    let net = init_network(&[2, 16, 16, 2], Activation::Tanh, 7)
        .unwrap()
        .with_scaling(InputScaling::new(vec![0.0, 0.0], vec![10.0, 20.0]));
    let point = [3.0, 12.5];
    let (out, jac) = net.forward_with_derivatives(&point).unwrap();
    println!("u(t, x) = {:?}", out.as_slice());
    for (o, row) in jac.iter().enumerate() {
        let fd = central_difference(|p| net.forward(p).unwrap().as_slice()[o], &point, 1e-6);
        println!(
            "output {o}: du/dt {:+.10} (fd {:+.10})  du/dx {:+.10} (fd {:+.10})",
            row[0], fd[0], row[1], fd[1]
        );
    }

    let relu = init_network(&[2, 16, 16, 2], Activation::Relu, 7).unwrap();
    let (_, jac) = relu.forward_with_derivatives(&point).unwrap();
    println!("relu Jacobian {jac:.6?}");
}
