//! Batch normalization over all active sites across the batch.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Per-channel batch-norm parameters and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BnParams<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub eps: T,
    pub momentum: T,
}

impl<T: Scalar> BnParams<T> {
    pub fn new(channels: usize) -> Self {
        BnParams {
            gamma: vec![T::ONE; channels],
            beta: vec![T::ZERO; channels],
            running_mean: vec![T::ZERO; channels],
            running_var: vec![T::ONE; channels],
            eps: T::from_f64(1e-5),
            momentum: T::from_f64(0.1),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// Saved forward state needed by the backward pass and the running-stat
/// update. Produced only in train mode.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub xhat: Matrix<T>,
    pub inv_std: Vec<T>,
    pub batch_mean: Vec<T>,
    pub batch_var: Vec<T>,
}

fn check_width<T: Scalar>(x: &Matrix<T>, params: &BnParams<T>) -> Result<()> {
    if x.cols() != params.channels() {
        return Err(Error::shape("batchnorm channels", params.channels(), x.cols()));
    }
    Ok(())
}

/// Train-mode forward: normalizes per channel with population statistics
/// over all rows. Pure; the running-stat update lives in
/// [`updated_running_stats`].
pub fn forward_train<T: Scalar>(
    x: &Matrix<T>,
    params: &BnParams<T>,
) -> Result<(Matrix<T>, BnCache<T>)> {
    check_width(x, params)?;
    let n = x.rows();
    let c = x.cols();
    let inv_n = T::ONE / T::from_f64(n as f64);

    let mut mean = vec![T::ZERO; c];
    for r in 0..n {
        for (m, &v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m *= inv_n;
    }
    let mut var = vec![T::ZERO; c];
    for r in 0..n {
        for ((s, &v), &m) in var.iter_mut().zip(x.row(r)).zip(mean.iter()) {
            let d = v - m;
            *s += d * d;
        }
    }
    for s in &mut var {
        *s *= inv_n;
    }

    let inv_std: Vec<T> = var.iter().map(|&v| T::ONE / (v + params.eps).sqrt()).collect();

    let mut xhat = Matrix::zeros(n, c);
    let mut y = Matrix::zeros(n, c);
    for r in 0..n {
        let xr = x.row(r);
        let hr = xhat.row_mut(r);
        let yr = y.row_mut(r);
        for ci in 0..c {
            let h = (xr[ci] - mean[ci]) * inv_std[ci];
            hr[ci] = h;
            yr[ci] = params.gamma[ci] * h + params.beta[ci];
        }
    }

    Ok((
        y,
        BnCache {
            xhat,
            inv_std,
            batch_mean: mean,
            batch_var: var,
        },
    ))
}

/// Eval-mode forward using the stored running statistics.
pub fn forward_eval<T: Scalar>(x: &Matrix<T>, params: &BnParams<T>) -> Result<Matrix<T>> {
    check_width(x, params)?;
    let c = x.cols();
    let scale: Vec<T> = (0..c)
        .map(|ci| params.gamma[ci] / (params.running_var[ci] + params.eps).sqrt())
        .collect();
    let mut y = Matrix::zeros(x.rows(), c);
    for r in 0..x.rows() {
        let xr = x.row(r);
        let yr = y.row_mut(r);
        for ci in 0..c {
            yr[ci] = scale[ci] * (xr[ci] - params.running_mean[ci]) + params.beta[ci];
        }
    }
    Ok(y)
}

/// Running statistics after one train-mode forward:
/// `running = (1 - momentum) * running + momentum * batch_stat`.
pub fn updated_running_stats<T: Scalar>(
    params: &BnParams<T>,
    cache: &BnCache<T>,
) -> (Vec<T>, Vec<T>) {
    let m = params.momentum;
    let keep = T::ONE - m;
    let mean = params
        .running_mean
        .iter()
        .zip(&cache.batch_mean)
        .map(|(&r, &b)| keep * r + m * b)
        .collect();
    let var = params
        .running_var
        .iter()
        .zip(&cache.batch_var)
        .map(|(&r, &b)| keep * r + m * b)
        .collect();
    (mean, var)
}

/// Train-mode backward through the batch statistics.
/// Returns `(d_gamma, d_beta, d_input)`.
pub fn backward_train<T: Scalar>(
    params: &BnParams<T>,
    cache: &BnCache<T>,
    grad_out: &Matrix<T>,
) -> (Vec<T>, Vec<T>, Matrix<T>) {
    let n = grad_out.rows();
    let c = grad_out.cols();
    let inv_n = T::ONE / T::from_f64(n as f64);

    let mut d_gamma = vec![T::ZERO; c];
    let mut d_beta = vec![T::ZERO; c];
    for r in 0..n {
        let gr = grad_out.row(r);
        let hr = cache.xhat.row(r);
        for ci in 0..c {
            d_gamma[ci] += gr[ci] * hr[ci];
            d_beta[ci] += gr[ci];
        }
    }

    // dL/dx = gamma * inv_std * (g - mean(g) - xhat * mean(g * xhat))
    let mut dx = Matrix::zeros(n, c);
    for r in 0..n {
        let gr = grad_out.row(r);
        let hr = cache.xhat.row(r);
        let dr = dx.row_mut(r);
        for ci in 0..c {
            let mean_g = d_beta[ci] * inv_n;
            let mean_gh = d_gamma[ci] * inv_n;
            dr[ci] = params.gamma[ci]
                * cache.inv_std[ci]
                * (gr[ci] - mean_g - hr[ci] * mean_gh);
        }
    }
    (d_gamma, d_beta, dx)
}
