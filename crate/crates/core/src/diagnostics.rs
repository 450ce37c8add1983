//! Curvature and landscape diagnostics: dominant Hessian eigenvalue by power
//! iteration, Hutchinson trace estimates, loss slices, and a finite-difference
//! gradient check.
//!
//! Every estimator is driven by an explicit seed. Hutchinson probes are
//! generated per index from that seed and accumulated in index order, so the
//! result does not depend on how probes are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::objective::{fd_base_step, hessian_vector_product, Objective};
use crate::params::{GradVector, ParamVector};

/// Which part of the training loss a diagnostic looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Restriction {
    All,
    Head,
    Tail,
}

impl Restriction {
    pub const ALL: [Restriction; 3] = [Restriction::All, Restriction::Head, Restriction::Tail];

    pub fn name(self) -> &'static str {
        match self {
            Restriction::All => "all",
            Restriction::Head => "head",
            Restriction::Tail => "tail",
        }
    }
}

impl std::fmt::Display for Restriction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Restriction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Restriction::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown restriction '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub restriction: Restriction,
    pub lambda_max: f64,
    pub trace: f64,
    pub trace_std_error: f64,
    pub probes_used: usize,
    pub power_iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpnessSettings {
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
    pub n_probes: usize,
}

impl Default for SharpnessSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iters: 100,
            tol: 1e-4,
            n_probes: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    /// `|λ|` of the dominant eigenvalue (Rayleigh quotient of the last iterate).
    pub value: f64,
    pub iters: usize,
    pub converged: bool,
}

fn gaussian_direction(params: &ParamVector, rng: &mut ChaCha8Rng) -> GradVector {
    let v = (0..params.len()).map(|_| StandardNormal.sample(rng)).collect();
    GradVector::new(v, params.layout().clone()).expect("layout length")
}

/// Unit direction with i.i.d. Gaussian entries.
pub fn random_direction(params: &ParamVector, seed: u64) -> Result<GradVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gaussian_direction(params, &mut rng).unit()
}

/// Power iteration on Hessian-vector products.
///
/// Stops once successive Rayleigh quotients differ by less than `tol`
/// relative, or after `max_iters` products.
pub fn lambda_max<O: Objective + ?Sized>(
    objective: &O,
    params: &ParamVector,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<PowerIteration> {
    if max_iters == 0 {
        return Err(Error::invalid("power iteration needs at least one iteration"));
    }
    if params.is_empty() {
        return Err(Error::invalid("no parameters"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = gaussian_direction(params, &mut rng).unit()?;
    let mut previous: Option<f64> = None;
    let mut estimate = 0.0;
    for it in 1..=max_iters {
        let hv = hessian_vector_product(objective, params, &v)?;
        estimate = v.dot(&hv);
        let norm = hv.norm();
        if norm == 0.0 {
            return Ok(PowerIteration {
                value: 0.0,
                iters: it,
                converged: true,
            });
        }
        if let Some(prev) = previous {
            if (estimate - prev).abs() < tol * estimate.abs().max(f64::MIN_POSITIVE) {
                return Ok(PowerIteration {
                    value: estimate.abs(),
                    iters: it,
                    converged: true,
                });
            }
        }
        previous = Some(estimate);
        v = hv.scaled(1.0 / norm);
    }
    Ok(PowerIteration {
        value: estimate.abs(),
        iters: max_iters,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEstimate {
    pub trace: f64,
    /// Standard error of the mean over probes, floored at the resolution of
    /// the finite-difference Hessian-vector product.
    pub std_error: f64,
    pub probes: usize,
}

/// Relative accuracy assumed for a single finite-difference `vᵀHv`.
const HVP_RELATIVE_RESOLUTION: f64 = 1e-8;

fn rademacher_probe(params: &ParamVector, seed: u64, index: usize) -> GradVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let v = (0..params.len())
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    GradVector::new(v, params.layout().clone()).expect("layout length")
}

/// Hutchinson estimate of `Tr(H)`: the mean of `vᵀHv` over Rademacher probes.
pub fn hessian_trace<O: Objective + Sync + ?Sized>(
    objective: &O,
    params: &ParamVector,
    seed: u64,
    n_probes: usize,
) -> Result<TraceEstimate> {
    if n_probes == 0 {
        return Err(Error::invalid("trace estimation needs at least one probe"));
    }
    if params.is_empty() {
        return Err(Error::invalid("no parameters"));
    }
    let samples: Vec<f64> = (0..n_probes)
        .into_par_iter()
        .map(|i| {
            let v = rademacher_probe(params, seed, i);
            hessian_vector_product(objective, params, &v).map(|hv| v.dot(&hv))
        })
        .collect::<Result<_>>()?;
    let n = n_probes as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if n_probes > 1 {
        samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let scale = samples.iter().map(|s| s.abs()).sum::<f64>() / n;
    let floor = HVP_RELATIVE_RESOLUTION * scale;
    Ok(TraceEstimate {
        trace: mean,
        std_error: (var / n + floor * floor).sqrt(),
        probes: n_probes,
    })
}

pub fn sharpness_report<O: Objective + Sync + ?Sized>(
    objective: &O,
    restriction: Restriction,
    params: &ParamVector,
    settings: &SharpnessSettings,
) -> Result<SharpnessReport> {
    let power = lambda_max(objective, params, settings.seed, settings.max_iters, settings.tol)?;
    let trace = hessian_trace(objective, params, settings.seed, settings.n_probes)?;
    Ok(SharpnessReport {
        restriction,
        lambda_max: power.value,
        trace: trace.trace,
        trace_std_error: trace.std_error,
        probes_used: trace.probes,
        power_iters: power.iters,
        converged: power.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicePoint {
    pub alpha: f64,
    /// Offset along the second direction (2-D slices only).
    pub beta: Option<f64>,
    pub restriction: Restriction,
    pub loss: f64,
}

/// Losses along `θ + α d₁ (+ β d₂)` on a symmetric grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeSlice {
    pub directions: Vec<GradVector>,
    pub offsets: Vec<f64>,
    pub points: Vec<SlicePoint>,
}

impl LandscapeSlice {
    pub fn center(&self, restriction: Restriction) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.restriction == restriction && p.alpha == 0.0 && p.beta.unwrap_or(0.0) == 0.0)
            .map(|p| p.loss)
    }
}

fn grid(half_width: f64, grid_points: usize) -> Vec<f64> {
    let mid = (grid_points / 2) as f64;
    (0..grid_points)
        .map(|i| {
            if mid == 0.0 {
                0.0
            } else {
                half_width * (i as f64 - mid) / mid
            }
        })
        .collect()
}

/// Evaluates each objective on a 1-D or 2-D grid around `params`.
///
/// Directions are normalized to unit length; `grid_points` must be odd so the
/// center of the grid is `params` itself.
pub fn landscape_slice(
    objectives: &[(Restriction, &(dyn Objective + Sync))],
    params: &ParamVector,
    directions: &[GradVector],
    half_width: f64,
    grid_points: usize,
) -> Result<LandscapeSlice> {
    if grid_points.is_multiple_of(2) {
        return Err(Error::invalid("grid_points must be odd"));
    }
    if directions.is_empty() || directions.len() > 2 {
        return Err(Error::invalid("a slice needs one or two directions"));
    }
    let directions: Vec<GradVector> = directions.iter().map(|d| d.unit()).collect::<Result<_>>()?;
    for d in &directions {
        check_len("slice direction", params.len(), d.len())?;
    }
    let offsets = grid(half_width, grid_points);
    let cells: Vec<(f64, Option<f64>)> = if directions.len() == 1 {
        offsets.iter().map(|&a| (a, None)).collect()
    } else {
        offsets
            .iter()
            .flat_map(|&a| offsets.iter().map(move |&b| (a, Some(b))))
            .collect()
    };
    let mut points = Vec::with_capacity(cells.len() * objectives.len());
    for (alpha, beta) in cells {
        let mut theta = if alpha == 0.0 {
            params.clone()
        } else {
            params.offset(&directions[0], alpha)?
        };
        if let Some(b) = beta.filter(|&b| b != 0.0) {
            theta = theta.offset(&directions[1], b)?;
        }
        for (restriction, obj) in objectives {
            points.push(SlicePoint {
                alpha,
                beta,
                restriction: *restriction,
                loss: obj.loss(&theta)?,
            });
        }
    }
    Ok(LandscapeSlice {
        directions,
        offsets,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub coords_checked: usize,
    pub passed: bool,
}

/// Coordinates above which the check samples instead of sweeping everything.
pub const GRAD_CHECK_FULL_SWEEP: usize = 2000;

/// Error measure for one coordinate: `|a − f| / max(1, |a|, |f|)`.
///
/// Relative for components of magnitude above one, absolute below.
pub fn scaled_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Compares an analytic gradient with central finite differences using the
/// per-coordinate step `h_j = ε^{1/3} (|θ_j| + 1)`.
pub fn grad_check_with<O, G>(
    objective: &O,
    params: &ParamVector,
    analytic: G,
    tol: f64,
    seed: u64,
) -> Result<GradCheckReport>
where
    O: Objective + ?Sized,
    G: FnOnce(&ParamVector) -> Result<GradVector>,
{
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let grad = analytic(params)?;
    check_len("analytic gradient", params.len(), grad.len())?;
    let coords: Vec<usize> = if params.len() <= GRAD_CHECK_FULL_SWEEP {
        (0..params.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, params.len(), GRAD_CHECK_FULL_SWEEP).into_vec()
    };
    let mut worst = (0.0, None);
    let mut probe = params.clone();
    for &j in &coords {
        let orig = params.values()[j];
        let h = fd_base_step() * (orig.abs() + 1.0);
        probe.values_mut()[j] = orig + h;
        let up = objective.loss(&probe)?;
        probe.values_mut()[j] = orig - h;
        let down = objective.loss(&probe)?;
        probe.values_mut()[j] = orig;
        let numeric = (up - down) / (2.0 * h);
        let err = scaled_error(grad.values()[j], numeric);
        if !(err <= worst.0) {
            worst = (err, Some(j));
        }
    }
    Ok(GradCheckReport {
        max_rel_error: worst.0,
        worst_index: worst.1,
        coords_checked: coords.len(),
        passed: worst.0 < tol,
    })
}

/// [`grad_check_with`] against the objective's own gradient.
pub fn grad_check<O: Objective + ?Sized>(
    objective: &O,
    params: &ParamVector,
    tol: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    grad_check_with(
        objective,
        params,
        |p| objective.loss_and_grad(p).map(|(_, g)| g),
        tol,
        seed,
    )
}
