use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Floor added to the denominator of the relative error. Gradients much
/// smaller than this are below what differencing an O(1) loss can resolve.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// Compares reverse-mode gradients of a scalar function against fourth-order
/// central differences, returning the largest relative error over all coordinates.
///
/// `f` builds the function on a fresh graph from one leaf per tensor in
/// `params` and returns the scalar output node.
pub fn finite_diff_check<F>(f: F, params: &[Tensor], step: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    if step <= 0.0 {
        return Err(Error::Contract(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let mut g = Graph::new();
    let leaves: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
    let root = f(&mut g, &leaves)?;
    let grads = g.backward(root)?;
    let analytic: Vec<Tensor> = leaves.iter().map(|&v| grads.wrt(v).clone()).collect();

    let eval = |ps: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let leaves: Vec<Var> = ps.iter().map(|p| g.constant(p.clone())).collect();
        let root = f(&mut g, &leaves)?;
        Ok(g.value(root).data()[0])
    };

    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for (pi, grad) in analytic.iter().enumerate() {
        for k in 0..grad.len() {
            let orig = work[pi].data()[k];
            let mut at = |d: f64| {
                work[pi].data_mut()[k] = orig + d;
                eval(&work)
            };
            let (p1, m1, p2, m2) = (at(step)?, at(-step)?, at(2.0 * step)?, at(-2.0 * step)?);
            work[pi].data_mut()[k] = orig;
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * step);
            let exact = grad.data()[k];
            let rel = (exact - numeric).abs() / (exact.abs() + numeric.abs() + RELATIVE_FLOOR);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
