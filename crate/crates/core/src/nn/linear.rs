//! Affine maps `y = x W + b` and their gradients.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Computes `x · w + b` with `b` a `1 x k` row broadcast over rows.
pub fn linear_forward(x: ArrayView2<'_, f64>, w: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != w.nrows() {
        return Err(Error::dims("linear input", w.nrows(), x.ncols()));
    }
    if b.dim() != (1, w.ncols()) {
        return Err(Error::dims("linear bias", format!("(1, {})", w.ncols()), format!("{:?}", b.dim())));
    }
    Ok(x.dot(w) + b)
}

/// Gradients of `x · w + b` given the output gradient `dy`:
/// `(dW, db, dx)`.
pub fn linear_backward(
    x: ArrayView2<'_, f64>,
    w: &Array2<f64>,
    dy: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    if dy.nrows() != x.nrows() || dy.ncols() != w.ncols() {
        return Err(Error::dims(
            "linear output gradient",
            format!("({}, {})", x.nrows(), w.ncols()),
            format!("{:?}", dy.dim()),
        ));
    }
    let dw = x.t().dot(&dy);
    let db = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dx = dy.dot(&w.t());
    Ok((dw, db, dx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sum_of_outputs_gives_transposed_input_times_ones() {
        let x = array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.0]];
        let w = array![[1.0, 0.0, 2.0], [0.0, 1.0, -1.0]];
        let dy = Array2::ones((3, 3));
        let (dw, db, dx) = linear_backward(x.view(), &w, dy.view()).unwrap();
        let expect = x.t().dot(&Array2::<f64>::ones((3, 3)));
        assert_eq!(dw, expect);
        assert_eq!(db, array![[3.0, 3.0, 3.0]]);
        assert_eq!(dx, array![[3.0, 0.0], [3.0, 0.0], [3.0, 0.0]]);
    }

    #[test]
    fn forward_broadcasts_bias() {
        let x = array![[1.0, 2.0]];
        let w = array![[1.0], [1.0]];
        let b = array![[0.5]];
        assert_eq!(linear_forward(x.view(), &w, &b).unwrap(), array![[3.5]]);
        assert!(linear_forward(array![[1.0]].view(), &w, &b).is_err());
    }

    #[test]
    fn zero_gradient_in_zero_gradient_out() {
        let x = array![[1.0, 2.0]];
        let w = array![[1.0], [1.0]];
        let (dw, db, dx) = linear_backward(x.view(), &w, Array2::zeros((1, 1)).view()).unwrap();
        assert!(dw.iter().chain(db.iter()).chain(dx.iter()).all(|&v| v == 0.0));
    }
}
