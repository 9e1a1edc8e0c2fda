use rand::Rng as _;

use super::{check_unit_range, AeArchitecture, AeModel};
use crate::error::{Error, Result};
use crate::nn::{relative_gradient_error, Gradients};
use crate::rng;

/// Build a freshly initialized model for `arch` and compare its
/// backpropagated gradient on `batch` with central differences of step
/// `epsilon`. Returns the relative error. Biases are drawn at random as well,
/// since zero biases leave units whose input is dead sitting exactly on the
/// ReLU kink.
pub fn grad_check(arch: &AeArchitecture, batch: &[Vec<f64>], epsilon: f64, seed: u64) -> Result<f64> {
    let mut model = AeModel::new(arch.clone(), seed);
    let mut r = rng::stream(seed, "ae-gradcheck-bias", 0);
    for layer in &mut model.net.layers {
        layer.bias.iter_mut().for_each(|b| *b = r.random_range(-0.5..0.5));
    }
    grad_check_with(&model, batch, epsilon, |_| {})
}

/// Gradient check of `model` on `batch`; `tamper` may alter the analytic
/// gradient before comparison.
pub fn grad_check_with(
    model: &AeModel,
    batch: &[Vec<f64>],
    epsilon: f64,
    tamper: impl FnOnce(&mut Gradients),
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("gradient check needs at least one row"));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::invalid("epsilon must be positive"));
    }
    check_unit_range(batch, model.input_dim())?;
    let idx: Vec<usize> = (0..batch.len()).collect();
    let (_, mut g) = model.loss_and_grad(batch, &idx);
    tamper(&mut g);

    let mut probe = model.clone();
    let shapes: Vec<usize> = probe.net.tensors().iter().map(|t| t.len()).collect();
    let mut numeric = Vec::with_capacity(shapes.len());
    for (ti, &len) in shapes.iter().enumerate() {
        let mut col = Vec::with_capacity(len);
        for k in 0..len {
            let orig = probe.net.tensors()[ti][k];
            probe.net.tensors_mut()[ti][k] = orig + epsilon;
            let up = probe.mean_error(batch, &idx);
            probe.net.tensors_mut()[ti][k] = orig - epsilon;
            let down = probe.mean_error(batch, &idx);
            probe.net.tensors_mut()[ti][k] = orig;
            col.push((up - down) / (2.0 * epsilon));
        }
        numeric.push(col);
    }
    let numeric: Vec<&[f64]> = numeric.iter().map(Vec::as_slice).collect();
    Ok(relative_gradient_error(&g.tensors(), &numeric))
}
