//! Elementwise activations: ReLU and exact (erf-based) GELU.

use crate::matrix::Matrix;
use crate::scalar::Scalar;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.3989422804014327;

pub fn relu_fwd<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    x.map(|v| v.max(T::ZERO))
}

pub fn relu_bwd<T: Scalar>(x: &Matrix<T>, grad_out: &Matrix<T>) -> Matrix<T> {
    let mut g = grad_out.clone();
    for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
        if xv <= T::ZERO {
            *gv = T::ZERO;
        }
    }
    g
}

/// Gaussian CDF, `Phi(x) = (1 + erf(x / sqrt(2))) / 2`.
fn phi<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5);
    half * (T::ONE + (x * T::from_f64(FRAC_1_SQRT_2)).erf())
}

pub fn gelu_fwd<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    x.map(|v| v * phi(v))
}

pub fn gelu_bwd<T: Scalar>(x: &Matrix<T>, grad_out: &Matrix<T>) -> Matrix<T> {
    let mut g = grad_out.clone();
    for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
        let pdf = T::from_f64(INV_SQRT_2PI) * (-xv * xv * T::from_f64(0.5)).exp();
        *gv *= phi(xv) + xv * pdf;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_clamps_negatives() {
        let x = Matrix::from_vec(1, 3, vec![-2.0f64, 0.0, 3.0]);
        let y = relu_fwd(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 3.0]);
    }

    #[test]
    fn gelu_zero_is_zero() {
        let x = Matrix::from_vec(1, 1, vec![0.0f64]);
        assert_eq!(gelu_fwd(&x).get(0, 0), 0.0);
    }

    #[test]
    fn gelu_matches_reference_values() {
        // x * Phi(x) at a few points, computed with the exact Gaussian CDF.
        let x = Matrix::from_vec(1, 3, vec![1.0f64, -1.0, 2.0]);
        let y = gelu_fwd(&x);
        assert!((y.get(0, 0) - 0.8413447460685429).abs() < 1e-12);
        assert!((y.get(0, 1) + 0.15865525393145707).abs() < 1e-12);
        assert!((y.get(0, 2) - 1.9544997361036416).abs() < 1e-12);
    }

    #[test]
    fn relu_bwd_masks_by_input_sign() {
        let x = Matrix::from_vec(1, 3, vec![-1.0f64, 0.0, 2.0]);
        let g = Matrix::from_vec(1, 3, vec![5.0f64, 5.0, 5.0]);
        assert_eq!(relu_bwd(&x, &g).data(), &[0.0, 0.0, 5.0]);
    }
}
