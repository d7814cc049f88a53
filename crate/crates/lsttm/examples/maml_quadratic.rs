//! The meta-update algebra on a scalar quadratic, the smallest case where
//! inner/outer/exact updates have closed forms.
//!
//! Loss (theta - 1)^2, theta = 0, alpha = beta = 0.1:
//!   inner:        theta' = 0.2
//!   first-order:  theta  <- 0.16
//!   exact:        theta  <- 0.128
//!
//! ```bash
//! cargo run -p lsttm --example maml_quadratic
//! ```

use lsttm::train::{hessian_vec_product, meta_gradient, MetaMode};

fn main() -> lsttm::Result<()> {
    let alpha = 0.1;
    let beta = 0.1;
    let theta = [0.0f64];
    let grad = |t: &[f64]| -> lsttm::Result<Vec<f64>> { Ok(vec![2.0 * (t[0] - 1.0)]) };

    // inner adaptation
    let g = grad(&theta)?;
    let adapted = [theta[0] - alpha * g[0]];
    println!("theta' = {}", adapted[0]);

    // first-order outer: apply the adapted-point gradient at theta
    let qg = grad(&adapted)?;
    let mut grad_fn = grad;
    let fo = meta_gradient(&theta, &qg, &mut grad_fn, alpha, MetaMode::FirstOrder)?;
    println!("first-order: theta <- {}", theta[0] - beta * fo[0]);

    // exact outer: the inner Jacobian (I - alpha H) via a Hessian-vector
    // product, H = 2 for this loss
    let hv = hessian_vec_product(&mut grad_fn, &theta, &qg)?;
    println!("H v = {} (analytic {})", hv[0], 2.0 * qg[0]);
    let exact = meta_gradient(&theta, &qg, &mut grad_fn, alpha, MetaMode::Exact)?;
    println!("exact: theta <- {}", theta[0] - beta * exact[0]);

    assert!((adapted[0] - 0.2).abs() < 1e-12);
    assert!((theta[0] - beta * fo[0] - 0.16).abs() < 1e-12);
    assert!((theta[0] - beta * exact[0] - 0.128).abs() < 1e-12);
    Ok(())
}
