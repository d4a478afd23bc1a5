//! Reverse mode, forward tangents, and the two nested.
//!
//! For `f(x, y) = sin(x) * y^2` this prints `f`, `df/dx` from a forward
//! tangent, the reverse gradient, and `d/dy (df/dx)` obtained by running a
//! reverse sweep from the recorded tangent node.

use dapinn::autodiff::{check_gradient, forward_tangent_on, record, Expr, Program, Tape};

struct SinTimesSquare;

impl Program for SinTimesSquare {
    fn leaf_names(&self) -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    fn eval<E: Expr>(&self, v: &[E]) -> E {
        v[0].sin() * v[1].square()
    }
}

fn main() {
    let p = [0.7, 1.3];
    let (x, y) = (p[0], p[1]);

    let rec = record(&SinTimesSquare, &p).unwrap();
    let grad = rec.tape.backward(rec.output).unwrap();
    println!("f           = {:.12}", rec.value().item());
    println!(
        "grad        = ({:.12}, {:.12})",
        grad.scalar("x"),
        grad.scalar("y")
    );
    println!(
        "expected    = ({:.12}, {:.12})",
        x.cos() * y * y,
        2.0 * x.sin() * y
    );

    let tape = Tape::new();
    let out = forward_tangent_on(&tape, &SinTimesSquare, &p, &[1.0, 0.0]).unwrap();
    let dfdx = out.tangent.unwrap();
    println!("df/dx       = {:.12}", dfdx.item());
    let mixed = dfdx.backward().unwrap();
    println!(
        "d2f/dxdy    = {:.12} (expected {:.12})",
        mixed.scalar("y"),
        2.0 * x.cos() * y
    );

    let report = check_gradient(&SinTimesSquare, &p, 1e-6, 1e-6).unwrap();
    println!("{report}");
}
