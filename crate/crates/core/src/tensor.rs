//! Dense row-major `f64` tensors and the handful of kernels the MLP needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::invalid(format!("tensor extents must be positive: {shape:?}")));
        }
        let expected: usize = shape.iter().product();
        crate::error::check_len("tensor data", expected, data.len())?;
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    /// 2-D tensor from a row-major buffer.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `out[b, o] = sum_i x[b, i] * w[o, i] + bias[o]`, i.e. `x · wᵀ + bias`.
pub(crate) fn affine(x: &[f64], batch: usize, fan_in: usize, w: &[f64], bias: &[f64]) -> Vec<f64> {
    let fan_out = bias.len();
    let mut out = vec![0.0; batch * fan_out];
    for b in 0..batch {
        let xr = &x[b * fan_in..(b + 1) * fan_in];
        let orow = &mut out[b * fan_out..(b + 1) * fan_out];
        for (o, slot) in orow.iter_mut().enumerate() {
            let wr = &w[o * fan_in..(o + 1) * fan_in];
            *slot = dot(xr, wr) + bias[o];
        }
    }
    out
}

/// Backward of [`affine`]: accumulates `dW += deltaᵀ · x`, `db += Σ_b delta`
/// and returns `delta · w` when `want_input_grad`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn affine_backward(
    x: &[f64],
    batch: usize,
    fan_in: usize,
    w: &[f64],
    delta: &[f64],
    fan_out: usize,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    want_input_grad: bool,
) -> Option<Vec<f64>> {
    for b in 0..batch {
        let xr = &x[b * fan_in..(b + 1) * fan_in];
        let dr = &delta[b * fan_out..(b + 1) * fan_out];
        for (o, &d) in dr.iter().enumerate() {
            grad_b[o] += d;
            let gw = &mut grad_w[o * fan_in..(o + 1) * fan_in];
            for (g, &xv) in gw.iter_mut().zip(xr) {
                *g += d * xv;
            }
        }
    }
    if !want_input_grad {
        return None;
    }
    let mut dx = vec![0.0; batch * fan_in];
    for b in 0..batch {
        let dr = &delta[b * fan_out..(b + 1) * fan_out];
        let dxr = &mut dx[b * fan_in..(b + 1) * fan_in];
        for (o, &d) in dr.iter().enumerate() {
            let wr = &w[o * fan_in..(o + 1) * fan_in];
            for (g, &wv) in dxr.iter_mut().zip(wr) {
                *g += d * wv;
            }
        }
    }
    Some(dx)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        let t = Tensor::new(vec![2, 3], vec![1.0; 6]).unwrap();
        assert_eq!(t.rows(), 2);
        assert_eq!(t.cols(), 3);
    }

    #[test]
    fn affine_matches_hand_computation() {
        // x = [[1, 2]], w = [[1, 0], [0, 1], [1, 1]], b = [0, 1, 2]
        let out = affine(&[1.0, 2.0], 1, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]);
        assert_eq!(out, vec![1.0, 3.0, 5.0]);
    }

    #[test]
    fn affine_backward_shapes() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let w = [1.0, -1.0];
        let delta = [0.5, -0.5];
        let mut gw = [0.0; 2];
        let mut gb = [0.0; 1];
        let dx = affine_backward(&x, 2, 2, &w, &delta, 1, &mut gw, &mut gb, true).unwrap();
        assert_eq!(gw, [0.5 * 1.0 - 0.5 * 3.0, 0.5 * 2.0 - 0.5 * 4.0]);
        assert_eq!(gb, [0.0]);
        assert_eq!(dx, vec![0.5, -0.5, -0.5, 0.5]);
    }
}
