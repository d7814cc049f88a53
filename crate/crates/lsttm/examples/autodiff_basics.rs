//! The reverse-mode tape: build a small expression, read gradients, and
//! cross-check them against central finite differences.
//!
//! ```bash
//! cargo run -p lsttm --example autodiff_basics
//! ```

use lsttm::autodiff::{grad_check, Array, Tape};

fn main() -> lsttm::Result<()> {
    // forward: loss = mean(ln(softmax(W x)))
    let w_data = vec![0.4, -0.2, 0.1, 0.7, 0.3, -0.5, -0.1, 0.2, 0.6];
    let x_data = vec![0.5, -1.0, 0.25];

    let mut tape = Tape::new();
    let w = tape.leaf(Array::matrix(3, 3, w_data.clone()));
    let x = tape.leaf(Array::vector(x_data.clone()));
    let h = tape.matmul(w, x)?;
    let s = tape.softmax(h)?;
    let l = tape.ln(s)?;
    let loss = tape.mean(l)?;
    println!("loss = {:.6}", tape.value(loss).item());

    tape.backward(loss)?;
    println!("dloss/dx = {:?}", tape.grad(x));

    // the same computation as a closure over the flattened inputs, for the
    // finite-difference oracle
    let f = |flat: &[f64]| -> lsttm::Result<f64> {
        let mut t = Tape::new();
        let w = t.leaf(Array::matrix(3, 3, flat[..9].to_vec()));
        let x = t.leaf(Array::vector(flat[9..].to_vec()));
        let h = t.matmul(w, x)?;
        let s = t.softmax(h)?;
        let l = t.ln(s)?;
        let loss = t.mean(l)?;
        Ok(t.value(loss).item())
    };
    let point: Vec<f64> = w_data.iter().chain(x_data.iter()).copied().collect();
    let mut analytic = tape.grad(w).to_vec();
    analytic.extend_from_slice(tape.grad(x));
    let err = grad_check(f, &analytic, &point, 1e-4)?;
    println!("max relative error vs central differences: {err:.2e}");
    assert!(err < 1e-4);
    Ok(())
}
