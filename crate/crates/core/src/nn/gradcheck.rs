//! Central finite-difference verification of analytic gradients.

use super::Params;
use crate::error::{Error, Result};

/// Models larger than this are refused: every scalar costs two loss
/// evaluations.
pub const GRAD_CHECK_MAX_PARAMS: usize = 500;

/// Compares analytic gradients with central differences
/// `(f(θ + εe) - f(θ - εe)) / 2ε` on every scalar parameter.
///
/// `objective` returns the loss and its analytic gradient at the given
/// parameters; it must be deterministic (dropout off). The result is the
/// largest `|a - fd| / max(|a|, |fd|, 1e-8)` over all parameters.
pub fn grad_check<F>(params: &Params, eps: f64, mut objective: F) -> Result<f64>
where
    F: FnMut(&Params) -> Result<(f64, Params)>,
{
    let n = params.num_scalars();
    if n > GRAD_CHECK_MAX_PARAMS {
        return Err(Error::invalid(format!(
            "gradient check limited to {GRAD_CHECK_MAX_PARAMS} parameters, model has {n}"
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let (loss, analytic) = objective(params)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss at the base point".into()));
    }
    params.check_same_shape(&analytic)?;
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let orig = params.get_flat(k);
        probe.set_flat(k, orig + eps);
        let (up, _) = objective(&probe)?;
        probe.set_flat(k, orig - eps);
        let (down, _) = objective(&probe)?;
        probe.set_flat(k, orig);
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::NonFinite(format!("loss while perturbing parameter {k}")));
        }
        let fd = (up - down) / (2.0 * eps);
        let a = analytic.get_flat(k);
        let err = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::super::Tensor;
    use super::*;
    use ndarray::{array, Array2};

    fn params(v: Array2<f64>) -> Params {
        Params::new(vec![Tensor {
            name: "w".into(),
            value: v,
        }])
    }

    #[test]
    fn constant_loss_has_zero_error() {
        let p = params(array![[1.0, 2.0]]);
        let err = grad_check(&p, 1e-5, |q| Ok((3.0, q.zeros_like()))).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn quadratic_is_exact_and_wrong_gradient_is_caught() {
        let p = params(array![[1.0, -2.0, 0.5]]);
        let good = grad_check(&p, 1e-5, |q| {
            let w = q.tensor(0);
            Ok((w.mapv(|v| v * v).sum(), params(w.mapv(|v| 2.0 * v))))
        })
        .unwrap();
        assert!(good < 1e-8);
        let bad = grad_check(&p, 1e-5, |q| {
            let w = q.tensor(0);
            Ok((w.mapv(|v| v * v).sum(), params(w.mapv(|v| 3.0 * v))))
        })
        .unwrap();
        assert!(bad > 0.3);
    }

    #[test]
    fn refuses_large_models_and_non_finite_losses() {
        let big = params(Array2::zeros((1, GRAD_CHECK_MAX_PARAMS + 1)));
        assert!(grad_check(&big, 1e-5, |q| Ok((0.0, q.zeros_like()))).is_err());
        let p = params(array![[1.0]]);
        assert!(matches!(
            grad_check(&p, 1e-5, |q| Ok((f64::NAN, q.zeros_like()))),
            Err(Error::NonFinite(_))
        ));
    }
}
