//! Differentiable scalar objectives over a flat parameter vector, and the
//! Hessian-vector product built on top of their gradients.

use crate::error::{check_len, Error, Result};
use crate::params::{GradVector, ParamVector};
use crate::tensor;

/// A loss over fixed data, evaluated at a parameter point.
///
/// Implementations must be re-entrant: optimizers and diagnostics call them
/// several times per step at different points.
pub trait Objective {
    fn num_params(&self) -> usize;

    fn loss_and_grad(&self, params: &ParamVector) -> Result<(f64, GradVector)>;

    fn loss(&self, params: &ParamVector) -> Result<f64> {
        self.loss_and_grad(params).map(|(l, _)| l)
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn num_params(&self) -> usize {
        (**self).num_params()
    }

    fn loss_and_grad(&self, params: &ParamVector) -> Result<(f64, GradVector)> {
        (**self).loss_and_grad(params)
    }

    fn loss(&self, params: &ParamVector) -> Result<f64> {
        (**self).loss(params)
    }
}

/// Cube root of machine epsilon.
pub fn fd_base_step() -> f64 {
    f64::EPSILON.cbrt()
}

/// Approximates `H v` by a central difference of gradients along `v̂ = v/|v|`:
/// `(∇L(θ + r v̂) − ∇L(θ − r v̂)) · |v| / (2r)` with `r = ε^{1/3} (1 + |θ|∞)`.
pub fn hessian_vector_product<O: Objective + ?Sized>(
    objective: &O,
    params: &ParamVector,
    v: &GradVector,
) -> Result<GradVector> {
    check_len("hvp direction", params.len(), v.len())?;
    let v_norm = v.norm();
    if v_norm == 0.0 || !v_norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    let unit = v.scaled(1.0 / v_norm);
    let r = fd_base_step() * (1.0 + tensor::max_abs(params.values()));
    let (_, g_plus) = objective.loss_and_grad(&params.offset(&unit, r)?)?;
    let (_, g_minus) = objective.loss_and_grad(&params.offset(&unit, -r)?)?;
    let scale = v_norm / (2.0 * r);
    let values = g_plus
        .values()
        .iter()
        .zip(g_minus.values())
        .map(|(p, m)| (p - m) * scale)
        .collect();
    GradVector::new(values, params.layout().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QuadraticFixture;

    #[test]
    fn hvp_on_diagonal_quadratic() {
        let q = QuadraticFixture::new(vec![2.0, 5.0], vec![0.0, 0.0]).unwrap();
        let theta = ParamVector::from_vec(vec![0.3, -1.2]);
        let e1 = hessian_vector_product(&q, &theta, &GradVector::from_vec(vec![1.0, 0.0])).unwrap();
        let e2 = hessian_vector_product(&q, &theta, &GradVector::from_vec(vec![0.0, 1.0])).unwrap();
        assert!((e1.values()[0] - 2.0).abs() < 1e-6 && e1.values()[1].abs() < 1e-6);
        assert!(e2.values()[0].abs() < 1e-6 && (e2.values()[1] - 5.0).abs() < 1e-6);
    }

    #[test]
    fn hvp_rejects_zero_direction() {
        let q = QuadraticFixture::new(vec![2.0, 5.0], vec![0.0, 0.0]).unwrap();
        let theta = ParamVector::from_vec(vec![1.0, 1.0]);
        let err = hessian_vector_product(&q, &theta, &GradVector::from_vec(vec![0.0, 0.0]));
        assert!(matches!(err, Err(Error::ZeroVector)));
    }

    #[test]
    fn hvp_scales_with_direction_norm() {
        let q = QuadraticFixture::new(vec![3.0], vec![1.0]).unwrap();
        let theta = ParamVector::from_vec(vec![-4.0]);
        let hv = hessian_vector_product(&q, &theta, &GradVector::from_vec(vec![10.0])).unwrap();
        assert!((hv.values()[0] - 30.0).abs() < 1e-6);
    }
}
