//! Sparse convolution as gather-multiply-scatter over a kernel map.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::sparse::{KernelMap, SparseTensor};

/// Row count below which the parallel kernels run serially.
const PAR_THRESHOLD: usize = 256;

/// Weights of one sparse convolution: one `C_in x C_out` matrix per kernel
/// offset. Bias is omitted; every convolution is followed by batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T> {
    pub c_in: usize,
    pub c_out: usize,
    pub weights: Vec<Matrix<T>>,
}

impl<T: Scalar> ConvParams<T> {
    pub fn zeros(kernel_volume: usize, c_in: usize, c_out: usize) -> Self {
        ConvParams {
            c_in,
            c_out,
            weights: (0..kernel_volume)
                .map(|_| Matrix::zeros(c_in, c_out))
                .collect(),
        }
    }

    pub fn kernel_volume(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() * self.c_in * self.c_out
    }
}

/// `out[p_out] = sum over offsets o and pairs (p_in, p_out) of x[p_in] W[o]`.
pub fn forward<T: Scalar>(
    input: &SparseTensor<T>,
    params: &ConvParams<T>,
    kmap: &KernelMap,
) -> Result<SparseTensor<T>> {
    if input.channels() != params.c_in {
        return Err(Error::shape("conv input channels", params.c_in, input.channels()));
    }
    if kmap.in_len != input.len() {
        return Err(Error::shape("conv kmap rows", kmap.in_len, input.len()));
    }
    if kmap.offsets.len() != params.kernel_volume() {
        return Err(Error::shape(
            "conv kernel volume",
            params.kernel_volume(),
            kmap.offsets.len(),
        ));
    }
    let n_out = kmap.n_out();
    let mut out = Matrix::zeros(n_out, params.c_out);
    let x = input.features();

    // Each output row is owned by exactly one task and accumulates its
    // incoming pairs in fixed offset order, so the result does not depend
    // on the thread count.
    let fill_row = |row: usize, acc: &mut [T]| {
        for &(oi, in_row) in kmap.inputs_of(row) {
            let w = &params.weights[oi as usize];
            let xr = x.row(in_row as usize);
            for (ci, &xv) in xr.iter().enumerate() {
                let wrow = w.row(ci);
                for (a, &wv) in acc.iter_mut().zip(wrow.iter()) {
                    *a += xv * wv;
                }
            }
        }
    };
    if n_out >= PAR_THRESHOLD {
        out.par_rows_mut()
            .enumerate()
            .for_each(|(row, acc)| fill_row(row, acc));
    } else {
        for row in 0..n_out {
            fill_row(row, out.row_mut(row));
        }
    }

    Ok(SparseTensor::new(
        kmap.out_coords.clone(),
        out,
        kmap.out_tensor_stride,
        input.batch_size(),
    ))
}

/// Exact adjoint of [`forward`]: returns per-offset weight gradients and the
/// input-feature gradient.
pub fn backward<T: Scalar>(
    input: &SparseTensor<T>,
    params: &ConvParams<T>,
    kmap: &KernelMap,
    grad_out: &Matrix<T>,
) -> Result<(Vec<Matrix<T>>, Matrix<T>)> {
    if grad_out.rows() != kmap.n_out() || grad_out.cols() != params.c_out {
        return Err(Error::shape(
            "conv grad_out",
            format!("{}x{}", kmap.n_out(), params.c_out),
            format!("{}x{}", grad_out.rows(), grad_out.cols()),
        ));
    }
    let x = input.features();

    // dW[o] = sum over pairs of x[p_in]^T grad_out[p_out]; offsets are
    // independent of one another, pairs within an offset accumulate serially.
    let grad_w: Vec<Matrix<T>> = kmap
        .pairs
        .par_iter()
        .map(|plist| {
            let mut gw = Matrix::zeros(params.c_in, params.c_out);
            for &(in_row, out_row) in plist {
                let xr = x.row(in_row as usize);
                let gr = grad_out.row(out_row as usize);
                for (ci, &xv) in xr.iter().enumerate() {
                    let grow = gw.row_mut(ci);
                    for (g, &gv) in grow.iter_mut().zip(gr.iter()) {
                        *g += xv * gv;
                    }
                }
            }
            gw
        })
        .collect();

    // dX[p_in] = sum over pairs of grad_out[p_out] W[o]^T.
    let n_in = input.len();
    let mut grad_x = Matrix::zeros(n_in, params.c_in);
    let fill_row = |row: usize, acc: &mut [T]| {
        for &(oi, out_row) in kmap.outputs_of(row) {
            let w = &params.weights[oi as usize];
            let gr = grad_out.row(out_row as usize);
            for (ci, a) in acc.iter_mut().enumerate() {
                let wrow = w.row(ci);
                let mut s = T::ZERO;
                for (&wv, &gv) in wrow.iter().zip(gr.iter()) {
                    s += wv * gv;
                }
                *a += s;
            }
        }
    };
    if n_in >= PAR_THRESHOLD {
        grad_x
            .par_rows_mut()
            .enumerate()
            .for_each(|(row, acc)| fill_row(row, acc));
    } else {
        for row in 0..n_in {
            fill_row(row, grad_x.row_mut(row));
        }
    }

    Ok((grad_w, grad_x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{batch, VoxelCoord};

    fn small_tensor() -> SparseTensor<f64> {
        let cells = vec![(0, 0, 0), (1, 0, 0), (1, 1, 0)];
        let feats = Matrix::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        batch(&[(cells, feats)]).unwrap()
    }

    #[test]
    fn center_identity_kernel_scales_pointwise() {
        let x = small_tensor();
        let km = KernelMap::from_tensor(&x, 3, 1).unwrap();
        let mut p = ConvParams::zeros(27, 2, 2);
        let center = 13;
        p.weights[center].set(0, 0, 2.0);
        p.weights[center].set(1, 1, 2.0);
        let y = forward(&x, &p, &km).unwrap();
        assert_eq!(y.coords(), x.coords());
        for r in 0..x.len() {
            for c in 0..2 {
                assert_eq!(y.features().get(r, c), 2.0 * x.features().get(r, c));
            }
        }
    }

    #[test]
    fn zero_weights_zero_output_and_zero_grads() {
        let x = small_tensor();
        let km = KernelMap::from_tensor(&x, 3, 1).unwrap();
        let p = ConvParams::zeros(27, 2, 3);
        let y = forward(&x, &p, &km).unwrap();
        assert!(y.features().data().iter().all(|&v| v == 0.0));

        let g0 = Matrix::zeros(km.n_out(), 3);
        let (gw, gx) = backward(&x, &p, &km, &g0).unwrap();
        assert!(gw.iter().all(|m| m.data().iter().all(|&v| v == 0.0)));
        assert!(gx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn center_only_kernel_adjoint_is_transpose() {
        // Identity center kernel: dL/dX = grad_out, dW[center] = X^T grad_out.
        let x = small_tensor();
        let km = KernelMap::from_tensor(&x, 3, 1).unwrap();
        let mut p = ConvParams::zeros(27, 2, 2);
        p.weights[13].set(0, 0, 1.0);
        p.weights[13].set(1, 1, 1.0);
        let g = Matrix::from_vec(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let (gw, gx) = backward(&x, &p, &km, &g).unwrap();
        assert_eq!(gx, g);
        let expect = x.features().transpose().matmul(&g).unwrap();
        assert_eq!(gw[13], expect);
        for (oi, m) in gw.iter().enumerate() {
            if oi != 13 {
                // Non-center offsets still see pairs between the two adjacent
                // sites, so only check the center analytically.
                assert_eq!(m.rows(), 2);
            }
        }
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let x = small_tensor();
        let km = KernelMap::from_tensor(&x, 3, 1).unwrap();
        let p = ConvParams::<f64>::zeros(27, 5, 2);
        assert!(matches!(forward(&x, &p, &km), Err(Error::Shape { .. })));
    }

    #[test]
    fn stride2_output_on_coarse_lattice() {
        let x = small_tensor();
        let km = KernelMap::from_tensor(&x, 3, 2).unwrap();
        let mut p = ConvParams::zeros(27, 2, 1);
        for w in &mut p.weights {
            w.set(0, 0, 1.0);
            w.set(1, 0, 1.0);
        }
        let y = forward(&x, &p, &km).unwrap();
        assert_eq!(y.tensor_stride(), 2);
        assert_eq!(y.coords(), &[VoxelCoord::new(0, 0, 0, 0)]);
        // All-ones kernel sums every feature of every site mapping here.
        let total: f64 = x.features().data().iter().sum();
        assert!((y.features().get(0, 0) - total).abs() < 1e-12);
    }
}
