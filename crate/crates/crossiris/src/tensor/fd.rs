//! Central finite-difference gradient checking.
//!
//! The quotient arithmetic runs in f64 while the forward passes stay f32,
//! matching how the rest of the crate computes.

use super::Tensor;
use crate::error::Result;

/// Relative error with a unit floor, so tiny gradients are compared on an
/// absolute scale instead of amplifying f32 noise.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Max relative error between the autodiff gradient of `f` at `init` and a
/// central finite difference with step `h`. `f` must map a tensor of the
/// given shape to a scalar loss.
pub fn grad_check<F>(shape: &[usize], init: &[f32], h: f32, f: F) -> Result<f64>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let leaf = Tensor::leaf(shape, init.to_vec())?;
    let loss = f(&leaf)?;
    loss.backward()?;
    let grad = leaf.grad().unwrap_or_else(|| vec![0.0; init.len()]);
    let mut max_err = 0.0f64;
    for i in 0..init.len() {
        let mut plus = init.to_vec();
        plus[i] += h;
        let mut minus = init.to_vec();
        minus[i] -= h;
        let lp = f(&Tensor::from_vec(shape, plus)?)?.value() as f64;
        let lm = f(&Tensor::from_vec(shape, minus)?)?.value() as f64;
        let fd = (lp - lm) / (2.0 * h as f64);
        max_err = max_err.max(rel_err(grad[i] as f64, fd));
    }
    Ok(max_err)
}
