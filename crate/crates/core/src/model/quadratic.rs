use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::objective::Objective;
use crate::params::{GradVector, ParamVector};

/// `L(θ) = ½ Σ a_j (θ_j − c_j)²` with every `a_j > 0`.
///
/// Closed-form gradient, Hessian `diag(a)` and optimum `c`; used as an oracle
/// for optimizer steps and curvature estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFixture {
    diag: Vec<f64>,
    offset: Vec<f64>,
}

impl QuadraticFixture {
    pub fn new(diag: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        check_len("quadratic offset", diag.len(), offset.len())?;
        if diag.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::invalid("quadratic coefficients must be positive and finite"));
        }
        Ok(Self { diag, offset })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.diag.iter().cloned().fold(0.0, f64::max)
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }
}

/// Loss and exact gradient `a ⊙ (θ − c)` of a quadratic fixture.
pub fn quadratic_loss_and_grad(fixture: &QuadraticFixture, params: &ParamVector) -> Result<(f64, GradVector)> {
    check_len("quadratic parameters", fixture.dim(), params.len())?;
    let mut loss = 0.0;
    let grad: Vec<f64> = params
        .values()
        .iter()
        .zip(&fixture.diag)
        .zip(&fixture.offset)
        .map(|((t, a), c)| {
            let d = t - c;
            loss += 0.5 * a * d * d;
            a * d
        })
        .collect();
    Ok((loss, GradVector::new(grad, params.layout().clone())?))
}

impl Objective for QuadraticFixture {
    fn num_params(&self) -> usize {
        self.dim()
    }

    fn loss_and_grad(&self, params: &ParamVector) -> Result<(f64, GradVector)> {
        quadratic_loss_and_grad(self, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimum_is_stationary() {
        let q = QuadraticFixture::new(vec![2.0, 0.5, 9.0], vec![1.0, -2.0, 0.25]).unwrap();
        let (l, g) = quadratic_loss_and_grad(&q, &ParamVector::from_vec(vec![1.0, -2.0, 0.25])).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_dimensional_arithmetic() {
        let q = QuadraticFixture::new(vec![2.0], vec![0.0]).unwrap();
        let (l, g) = quadratic_loss_and_grad(&q, &ParamVector::from_vec(vec![3.0])).unwrap();
        assert_eq!(l, 9.0);
        assert_eq!(g.values(), &[6.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let q = QuadraticFixture::new(vec![2.0, 5.0, 0.3], vec![0.5, -1.0, 4.0]).unwrap();
        let theta = vec![1.7, 0.2, -3.3];
        let (_, g) = quadratic_loss_and_grad(&q, &ParamVector::from_vec(theta.clone())).unwrap();
        for j in 0..3 {
            let h = 1e-5;
            let mut plus = theta.clone();
            plus[j] += h;
            let mut minus = theta.clone();
            minus[j] -= h;
            let fd = (q.loss(&ParamVector::from_vec(plus)).unwrap() - q.loss(&ParamVector::from_vec(minus)).unwrap())
                / (2.0 * h);
            assert!(
                (fd - g.values()[j]).abs() < 1e-8,
                "coord {j}: {fd} vs {}",
                g.values()[j]
            );
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(QuadraticFixture::new(vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(QuadraticFixture::new(vec![1.0], vec![0.0, 0.0]).is_err());
        let q = QuadraticFixture::new(vec![1.0], vec![0.0]).unwrap();
        assert!(quadratic_loss_and_grad(&q, &ParamVector::from_vec(vec![1.0, 2.0])).is_err());
    }
}
