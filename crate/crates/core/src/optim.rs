//! SGD, SAM and ImbSAM update rules.
//!
//! All three share one descent routine: given a direction `g + λθ` (where `g`
//! is whatever gradient the rule descends along), the heavy-ball buffer is
//! updated as `m ← μ m + (g + λθ)` and parameters as `θ ← θ − α_t m`.
//!
//! * SGD descends `∇L(θ)`.
//! * SAM evaluates `ε = ρ ∇L(θ)/‖∇L(θ)‖₂` and descends `∇L(θ + ε)`.
//! * ImbSAM splits the batch by class frequency and descends
//!   `∇L_head(θ) + ∇L_tail(θ + ε_tail)`, where `ε_tail` is built from the
//!   tail gradient alone. The head loss is never evaluated at a perturbed point.
//!
//! Weight decay is always taken at the unperturbed θ.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::params::{GradVector, ParamVector};

/// Gradient norms at or below this are treated as zero when normalizing.
pub const DEGENERATE_GRAD_NORM: f64 = 1e-12;

/// Default SAM neighbourhood radius.
pub const DEFAULT_RHO: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Sam,
    #[serde(rename = "imbsam")]
    ImbSam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Sam => "sam",
            OptimizerKind::ImbSam => "imbsam",
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "sam" => Ok(OptimizerKind::Sam),
            "imbsam" => Ok(OptimizerKind::ImbSam),
            other => Err(Error::invalid(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Cosine decay from the base rate to zero over `total_steps`.
    Cosine { total_steps: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub learning_rate: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Per-class multipliers on the training loss; `None` means all ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub schedule: LrSchedule,
}

fn default_rho() -> f64 {
    DEFAULT_RHO
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            weight_decay: 0.0,
            momentum: 0.0,
            rho: DEFAULT_RHO,
            class_weights: None,
            schedule: LrSchedule::Constant,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight decay must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::invalid("rho must be non-negative"));
        }
        if let Some(w) = &self.class_weights {
            if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::invalid("class weights must be non-negative"));
            }
        }
        Ok(())
    }

    /// Learning rate for zero-based step `t`.
    pub fn learning_rate_at(&self, t: u64) -> f64 {
        match self.schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::Cosine { total_steps } => {
                let frac = (t as f64 / total_steps.max(1) as f64).min(1.0);
                0.5 * self.learning_rate * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }

    pub fn class_weight(&self, class: usize) -> f64 {
        self.class_weights
            .as_ref()
            .and_then(|w| w.get(class).copied())
            .unwrap_or(1.0)
    }
}

/// Momentum buffer and step counter, exclusively owned by one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    buffer: Vec<f64>,
    step: u64,
}

impl OptimState {
    pub fn new(num_params: usize) -> Self {
        Self {
            buffer: vec![0.0; num_params],
            step: 0,
        }
    }

    pub fn for_params(params: &ParamVector) -> Self {
        Self::new(params.len())
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn buffer(&self) -> &[f64] {
        &self.buffer
    }
}

/// What one optimizer step observed.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// Loss at the unperturbed θ (head + tail for ImbSAM).
    pub loss: f64,
    pub grad_evals: usize,
    /// `‖ε‖₂` of the perturbation applied (0 for SGD).
    pub perturbation_norm: f64,
}

pub type LossGrad = (f64, GradVector);

/// `ε = ρ g / ‖g‖₂`, or zero when `‖g‖₂ ≤` [`DEGENERATE_GRAD_NORM`].
pub fn sam_perturbation(grad: &GradVector, rho: f64) -> GradVector {
    let n = grad.norm();
    if n <= DEGENERATE_GRAD_NORM || rho == 0.0 {
        return GradVector::zeros(grad.layout().clone());
    }
    grad.scaled(rho / n)
}

fn is_zero(v: &GradVector) -> bool {
    v.values().iter().all(|&x| x == 0.0)
}

fn descend(state: &mut OptimState, config: &OptimConfig, params: &mut ParamVector, grad: &GradVector) -> Result<()> {
    check_len("gradient", params.len(), grad.len())?;
    check_len("momentum buffer", params.len(), state.buffer.len())?;
    if !grad.is_finite() {
        return Err(Error::NonFiniteGradient { step: state.step });
    }
    let lr = config.learning_rate_at(state.step);
    let (mu, wd) = (config.momentum, config.weight_decay);
    for ((theta, m), g) in params
        .values_mut()
        .iter_mut()
        .zip(state.buffer.iter_mut())
        .zip(grad.values())
    {
        let d = g + wd * *theta;
        *m = mu * *m + d;
        *theta -= lr * *m;
    }
    state.step += 1;
    Ok(())
}

/// One heavy-ball step along `∇L(θ) + λθ`.
pub fn sgd_step<F>(
    state: &mut OptimState,
    config: &OptimConfig,
    params: &mut ParamVector,
    mut loss_grad: F,
) -> Result<StepInfo>
where
    F: FnMut(&ParamVector) -> Result<LossGrad>,
{
    let (loss, grad) = loss_grad(params)?;
    descend(state, config, params, &grad)?;
    Ok(StepInfo {
        loss,
        grad_evals: 1,
        perturbation_norm: 0.0,
    })
}

/// One SAM step: ascend to `θ + ε`, then descend along `∇L(θ + ε) + λθ`.
///
/// When ε vanishes (ρ = 0 or a degenerate gradient) the first gradient is
/// reused, so the step is identical to [`sgd_step`].
pub fn sam_step<F>(
    state: &mut OptimState,
    config: &OptimConfig,
    params: &mut ParamVector,
    mut loss_grad: F,
) -> Result<StepInfo>
where
    F: FnMut(&ParamVector) -> Result<LossGrad>,
{
    let (loss, g1) = loss_grad(params)?;
    if !g1.is_finite() {
        return Err(Error::NonFiniteGradient { step: state.step });
    }
    let eps = sam_perturbation(&g1, config.rho);
    if is_zero(&eps) {
        descend(state, config, params, &g1)?;
        return Ok(StepInfo {
            loss,
            grad_evals: 1,
            perturbation_norm: 0.0,
        });
    }
    let (_, g2) = loss_grad(&params.perturbed(&eps)?)?;
    descend(state, config, params, &g2)?;
    Ok(StepInfo {
        loss,
        grad_evals: 2,
        perturbation_norm: eps.norm(),
    })
}

/// One ImbSAM step over a batch split into head and tail parts.
///
/// `full` evaluates the whole batch, `L = L_head + L_tail`. Without a tail
/// part this is [`sgd_step`] on `full`, without a head part it is
/// [`sam_step`] on `full`. Otherwise the head gradient is taken at θ and the
/// tail gradient at `θ + ρ ∇L_tail/‖∇L_tail‖₂`, for three gradient
/// evaluations. When the tail perturbation vanishes the step falls back to
/// [`sgd_step`] on `full`.
pub fn imbsam_step<H, T, F>(
    state: &mut OptimState,
    config: &OptimConfig,
    params: &mut ParamVector,
    head: Option<H>,
    tail: Option<T>,
    full: F,
) -> Result<StepInfo>
where
    H: FnMut(&ParamVector) -> Result<LossGrad>,
    T: FnMut(&ParamVector) -> Result<LossGrad>,
    F: FnMut(&ParamVector) -> Result<LossGrad>,
{
    let (mut head, mut tail) = match (head, tail) {
        (None, None) => return Err(Error::BothPartsEmpty),
        (Some(_), None) => return sgd_step(state, config, params, full),
        (None, Some(_)) => return sam_step(state, config, params, full),
        (Some(h), Some(t)) => (h, t),
    };
    let (tail_loss, tail_grad) = tail(params)?;
    if !tail_grad.is_finite() {
        return Err(Error::NonFiniteGradient { step: state.step });
    }
    let eps = sam_perturbation(&tail_grad, config.rho);
    if is_zero(&eps) {
        let mut info = sgd_step(state, config, params, full)?;
        info.grad_evals += 1;
        return Ok(info);
    }
    let (head_loss, head_grad) = head(params)?;
    let (_, tail_grad) = tail(&params.perturbed(&eps)?)?;
    let combined = head_grad.add(&tail_grad)?;
    descend(state, config, params, &combined)?;
    Ok(StepInfo {
        loss: head_loss + tail_loss,
        grad_evals: 3,
        perturbation_norm: eps.norm(),
    })
}

/// Decomposition of the SAM perturbation into head and tail contributions,
/// both normalized by the whole-batch gradient norm.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSplit {
    pub eps_head: GradVector,
    pub eps_tail: GradVector,
    /// `‖ε_head‖ / (‖ε_tail‖ + machine ε)`; `None` when the combined gradient is zero.
    pub norm_ratio: Option<f64>,
}

pub fn perturbation_decomposition(
    head_grad: &GradVector,
    tail_grad: &GradVector,
    rho: f64,
) -> Result<PerturbationSplit> {
    let total = head_grad.add(tail_grad)?;
    let n = total.norm();
    if n <= DEGENERATE_GRAD_NORM {
        return Ok(PerturbationSplit {
            eps_head: GradVector::zeros(head_grad.layout().clone()),
            eps_tail: GradVector::zeros(tail_grad.layout().clone()),
            norm_ratio: None,
        });
    }
    let eps_head = head_grad.scaled(rho / n);
    let eps_tail = tail_grad.scaled(rho / n);
    let norm_ratio = Some(eps_head.norm() / (eps_tail.norm() + f64::EPSILON));
    Ok(PerturbationSplit {
        eps_head,
        eps_tail,
        norm_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{quadratic_loss_and_grad, QuadraticFixture};
    use std::cell::Cell;

    fn quad(diag: &[f64]) -> QuadraticFixture {
        QuadraticFixture::new(diag.to_vec(), vec![0.0; diag.len()]).unwrap()
    }

    fn plain(lr: f64) -> OptimConfig {
        OptimConfig {
            learning_rate: lr,
            weight_decay: 0.0,
            momentum: 0.0,
            rho: 0.05,
            class_weights: None,
            schedule: LrSchedule::Constant,
        }
    }

    #[test]
    fn sgd_one_step() {
        let q = quad(&[2.0]);
        let mut p = ParamVector::from_vec(vec![3.0]);
        let mut s = OptimState::for_params(&p);
        sgd_step(&mut s, &plain(0.1), &mut p, |t| quadratic_loss_and_grad(&q, t)).unwrap();
        assert!((p.values()[0] - 2.4).abs() < 1e-12);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn sgd_fixed_point() {
        let mut p = ParamVector::from_vec(vec![1.5, -2.0]);
        let mut s = OptimState::for_params(&p);
        sgd_step(&mut s, &plain(0.3), &mut p, |t| {
            Ok((0.0, GradVector::zeros(t.layout().clone())))
        })
        .unwrap();
        assert_eq!(p.values(), &[1.5, -2.0]);
    }

    #[test]
    fn heavy_ball_two_steps() {
        // θ₀ = 3, g₀ = 6, m₁ = 6, θ₁ = 2.4; g₁ = 4.8, m₂ = 0.9·6 + 4.8 = 10.2, θ₂ = 1.38.
        let q = quad(&[2.0]);
        let cfg = OptimConfig {
            momentum: 0.9,
            ..plain(0.1)
        };
        let mut p = ParamVector::from_vec(vec![3.0]);
        let mut s = OptimState::for_params(&p);
        for _ in 0..2 {
            sgd_step(&mut s, &cfg, &mut p, |t| quadratic_loss_and_grad(&q, t)).unwrap();
        }
        assert!((p.values()[0] - 1.38).abs() < 1e-12);
    }

    #[test]
    fn weight_decay_uses_current_theta() {
        let mut p = ParamVector::from_vec(vec![2.0]);
        let mut s = OptimState::for_params(&p);
        let cfg = OptimConfig {
            weight_decay: 0.5,
            ..plain(0.1)
        };
        sgd_step(&mut s, &cfg, &mut p, |t| {
            Ok((0.0, GradVector::zeros(t.layout().clone())))
        })
        .unwrap();
        assert!((p.values()[0] - 1.9).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_names_step() {
        let mut p = ParamVector::from_vec(vec![2.0]);
        let mut s = OptimState::for_params(&p);
        let err = sgd_step(&mut s, &plain(0.1), &mut p, |_| {
            Ok((0.0, GradVector::from_vec(vec![f64::NAN])))
        });
        assert!(matches!(err, Err(Error::NonFiniteGradient { step: 0 })));
    }

    #[test]
    fn perturbation_examples() {
        let e = sam_perturbation(&GradVector::from_vec(vec![3.0, 4.0]), 0.05);
        assert!((e.values()[0] - 0.03).abs() < 1e-15 && (e.values()[1] - 0.04).abs() < 1e-15);
        let z = sam_perturbation(&GradVector::from_vec(vec![0.0, 0.0]), 0.05);
        assert_eq!(z.values(), &[0.0, 0.0]);
        let tiny = sam_perturbation(&GradVector::from_vec(vec![1e-13, 0.0]), 0.05);
        assert_eq!(tiny.values(), &[0.0, 0.0]);
    }

    #[test]
    fn sam_one_step_on_quadratic() {
        // ε = 0.05, g₂ = 2·3.05 = 6.1, θ′ = 3 − 0.61 = 2.39.
        let q = quad(&[2.0]);
        let mut p = ParamVector::from_vec(vec![3.0]);
        let mut s = OptimState::for_params(&p);
        let info = sam_step(&mut s, &plain(0.1), &mut p, |t| quadratic_loss_and_grad(&q, t)).unwrap();
        assert!((p.values()[0] - 2.39).abs() < 1e-12);
        assert_eq!(info.grad_evals, 2);
    }

    #[test]
    fn sam_with_zero_rho_is_sgd() {
        let q = QuadraticFixture::new(vec![2.0, 0.7, 3.3], vec![0.1, 0.2, -0.3]).unwrap();
        let cfg = OptimConfig {
            rho: 0.0,
            momentum: 0.9,
            weight_decay: 1e-3,
            ..plain(0.05)
        };
        let mut a = ParamVector::from_vec(vec![1.0, -2.0, 0.5]);
        let mut b = a.clone();
        let (mut sa, mut sb) = (OptimState::for_params(&a), OptimState::for_params(&b));
        for _ in 0..10 {
            sgd_step(&mut sa, &cfg, &mut a, |t| quadratic_loss_and_grad(&q, t)).unwrap();
            sam_step(&mut sb, &cfg, &mut b, |t| quadratic_loss_and_grad(&q, t)).unwrap();
        }
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }

    #[test]
    fn sam_moves_toward_optimum_on_1d_quadratics() {
        for &a in &[0.5, 1.0, 2.0, 5.0] {
            for &theta0 in &[-3.0, -0.2, 0.4, 2.5] {
                let q = QuadraticFixture::new(vec![a], vec![1.0]).unwrap();
                let mut p = ParamVector::from_vec(vec![theta0]);
                let mut s = OptimState::for_params(&p);
                sam_step(&mut s, &plain(0.01), &mut p, |t| quadratic_loss_and_grad(&q, t)).unwrap();
                assert!((p.values()[0] - 1.0).abs() < (theta0 - 1.0f64).abs());
            }
        }
    }

    #[test]
    fn imbsam_closed_form_step() {
        // head ½·2θ₁², tail ½·5θ₂² at θ = (1, 1): ε_tail = (0, 0.05),
        // direction (2, 0) + (0, 5.25), θ′ = (0.8, 0.475).
        let head = QuadraticFixture::new(vec![2.0, 1.0], vec![0.0, 0.0]).unwrap();
        let tail = QuadraticFixture::new(vec![1.0, 5.0], vec![0.0, 0.0]).unwrap();
        let head_only = |t: &ParamVector| {
            let (_, g) = quadratic_loss_and_grad(&head, t)?;
            let v = t.values()[0];
            Ok((v * v, GradVector::from_vec(vec![g.values()[0], 0.0])))
        };
        let tail_only = |t: &ParamVector| {
            let (_, g) = quadratic_loss_and_grad(&tail, t)?;
            let v = t.values()[1];
            Ok((2.5 * v * v, GradVector::from_vec(vec![0.0, g.values()[1]])))
        };
        let mut p = ParamVector::from_vec(vec![1.0, 1.0]);
        let mut s = OptimState::for_params(&p);
        let full = |t: &ParamVector| {
            let ((lh, gh), (lt, gt)) = (head_only(t)?, tail_only(t)?);
            Ok((lh + lt, gh.add(&gt)?))
        };
        let info = imbsam_step(&mut s, &plain(0.1), &mut p, Some(head_only), Some(tail_only), full).unwrap();
        assert!((p.values()[0] - 0.8).abs() < 1e-12);
        assert!((p.values()[1] - 0.475).abs() < 1e-12);
        assert_eq!(info.grad_evals, 3);
    }

    #[test]
    fn imbsam_evaluates_head_once_at_theta() {
        let q = quad(&[1.0, 2.0]);
        let head_calls = Cell::new(0);
        let tail_calls = Cell::new(0);
        let theta0 = ParamVector::from_vec(vec![0.5, -0.5]);
        let mut p = theta0.clone();
        let mut s = OptimState::for_params(&p);
        let head = |t: &ParamVector| {
            head_calls.set(head_calls.get() + 1);
            assert_eq!(t, &theta0);
            quadratic_loss_and_grad(&q, t)
        };
        let tail = |t: &ParamVector| {
            tail_calls.set(tail_calls.get() + 1);
            quadratic_loss_and_grad(&q, t)
        };
        let full = |_: &ParamVector| -> Result<LossGrad> { panic!("whole batch not needed") };
        imbsam_step(&mut s, &plain(0.1), &mut p, Some(head), Some(tail), full).unwrap();
        assert_eq!((head_calls.get(), tail_calls.get()), (1, 2));
    }

    type Closure<'a> = fn(&ParamVector) -> Result<LossGrad>;

    #[test]
    fn imbsam_needs_a_part() {
        let mut p = ParamVector::from_vec(vec![1.0]);
        let mut s = OptimState::for_params(&p);
        let full: Closure = |t| Ok((0.0, GradVector::zeros(t.layout().clone())));
        let err = imbsam_step::<Closure, Closure, _>(&mut s, &plain(0.1), &mut p, None, None, full);
        assert!(matches!(err, Err(Error::BothPartsEmpty)));
    }

    #[test]
    fn imbsam_reductions() {
        let q = QuadraticFixture::new(vec![2.0, 0.7], vec![0.3, -0.1]).unwrap();
        let cfg = OptimConfig {
            momentum: 0.9,
            weight_decay: 1e-2,
            ..plain(0.05)
        };
        let f = |t: &ParamVector| quadratic_loss_and_grad(&q, t);

        // All-tail batch: SAM on the whole batch.
        let (mut a, mut b) = (
            ParamVector::from_vec(vec![1.0, 2.0]),
            ParamVector::from_vec(vec![1.0, 2.0]),
        );
        let (mut sa, mut sb) = (OptimState::new(2), OptimState::new(2));
        for _ in 0..5 {
            sam_step(&mut sa, &cfg, &mut a, f).unwrap();
            imbsam_step::<Closure, _, _>(&mut sb, &cfg, &mut b, None, Some(f), f).unwrap();
        }
        assert_eq!(a, b);

        // All-head batch: SGD.
        let (mut a, mut b) = (
            ParamVector::from_vec(vec![1.0, 2.0]),
            ParamVector::from_vec(vec![1.0, 2.0]),
        );
        let (mut sa, mut sb) = (OptimState::new(2), OptimState::new(2));
        for _ in 0..5 {
            sgd_step(&mut sa, &cfg, &mut a, f).unwrap();
            imbsam_step::<_, Closure, _>(&mut sb, &cfg, &mut b, Some(f), None, f).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn imbsam_zero_rho_matches_sgd_on_combined_loss() {
        let qh = QuadraticFixture::new(vec![2.0, 0.5], vec![0.3, -0.1]).unwrap();
        let qt = QuadraticFixture::new(vec![0.1, 4.0], vec![-1.0, 0.7]).unwrap();
        let cfg = OptimConfig {
            rho: 0.0,
            momentum: 0.9,
            weight_decay: 5e-4,
            ..plain(0.05)
        };
        let h = |t: &ParamVector| quadratic_loss_and_grad(&qh, t);
        let tl = |t: &ParamVector| quadratic_loss_and_grad(&qt, t);
        let full = |t: &ParamVector| {
            let ((lh, gh), (lt, gt)) = (h(t)?, tl(t)?);
            Ok((lh + lt, gh.add(&gt)?))
        };
        let (mut a, mut b) = (
            ParamVector::from_vec(vec![1.0, 2.0]),
            ParamVector::from_vec(vec![1.0, 2.0]),
        );
        let (mut sa, mut sb) = (OptimState::new(2), OptimState::new(2));
        for _ in 0..20 {
            sgd_step(&mut sa, &cfg, &mut a, full).unwrap();
            imbsam_step(&mut sb, &cfg, &mut b, Some(h), Some(tl), full).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn decomposition_examples() {
        let d = perturbation_decomposition(
            &GradVector::from_vec(vec![10.0, 0.0]),
            &GradVector::from_vec(vec![0.0, 0.1]),
            0.05,
        )
        .unwrap();
        assert!((d.norm_ratio.unwrap() - 100.0).abs() < 1e-9);
        let g = GradVector::from_vec(vec![1.0, -2.0]);
        let d = perturbation_decomposition(&g, &g, 0.05).unwrap();
        assert!((d.norm_ratio.unwrap() - 1.0).abs() < 1e-12);
        let zero = perturbation_decomposition(&g, &g.scaled(-1.0), 0.05).unwrap();
        assert_eq!(zero.norm_ratio, None);
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let cfg = OptimConfig {
            schedule: LrSchedule::Cosine { total_steps: 100 },
            ..plain(0.2)
        };
        assert_eq!(cfg.learning_rate_at(0), 0.2);
        assert!((cfg.learning_rate_at(50) - 0.1).abs() < 1e-15);
        assert!(cfg.learning_rate_at(100).abs() < 1e-15);
        assert_eq!(plain(0.2).learning_rate_at(77), 0.2);
    }

    #[test]
    fn config_validation() {
        assert!(plain(0.1).validate().is_ok());
        assert!(plain(0.0).validate().is_err());
        assert!(OptimConfig {
            momentum: 1.0,
            ..plain(0.1)
        }
        .validate()
        .is_err());
        assert!(OptimConfig {
            rho: -0.1,
            ..plain(0.1)
        }
        .validate()
        .is_err());
        assert!(OptimConfig {
            class_weights: Some(vec![1.0, -2.0]),
            ..plain(0.1)
        }
        .validate()
        .is_err());
        assert_eq!("ImbSAM".parse::<OptimizerKind>().unwrap(), OptimizerKind::ImbSam);
    }
}
