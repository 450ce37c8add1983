use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, RunSeeds};
use crate::data::{
    batches, evaluation_splits, generate_balanced_test, generate_longtailed, split_classes, ClassSplit, EvalSplits,
    LongTailedDataset,
};
use crate::diagnostics::{sharpness_report, Restriction, SharpnessReport};
use crate::error::{Error, Result};
use crate::metrics::{
    accuracy_gain, binary_rank_metrics, per_class_accuracy, BinaryMetrics, ClassAccuracy, GainReport,
};
use crate::model::{MlpObjective, MlpSpec};
use crate::optim::{imbsam_step, sam_step, sgd_step, OptimConfig, OptimState, OptimizerKind, StepInfo};
use crate::params::ParamVector;

/// Everything a run needs before the first step: data, split, model and
/// optimizer settings for one repeat seed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub seeds: RunSeeds,
    pub train: LongTailedDataset,
    pub test: LongTailedDataset,
    pub split: ClassSplit,
    pub eval_splits: EvalSplits,
    pub spec: MlpSpec,
    pub optim: OptimConfig,
}

impl Prepared {
    pub fn new(config: &ExperimentConfig, repeat: u64) -> Result<Self> {
        config.validate()?;
        let seeds = config.seeds_for(repeat);
        let data_spec = config.dataset_spec(seeds.data);
        let train = generate_longtailed(&data_spec)?;
        let test = generate_balanced_test(&data_spec, config.dataset.test_per_class)?;
        let split = split_classes(&train, config.split.eta);
        let eval_splits = evaluation_splits(train.class_counts(), config.thresholds());
        let spec = config.mlp_spec(seeds.init);
        let steps_per_epoch = train.len().div_ceil(config.training.batch_size) as u64;
        let mut optim = config.optim_config(steps_per_epoch * config.training.epochs as u64);
        if optim.class_weights.is_none() {
            if let Some(w) = config.optimizer.tail_weight {
                optim.class_weights = Some(
                    (0..train.num_classes())
                        .map(|k| if split.is_head(k) { 1.0 } else { w })
                        .collect(),
                );
            }
        }
        if let Some(w) = &optim.class_weights {
            crate::error::check_len("class weights", train.num_classes(), w.len())?;
        }
        Ok(Self {
            seeds,
            train,
            test,
            split,
            eval_splits,
            spec,
            optim,
        })
    }

    /// Training-set indices of a loss restriction.
    pub fn restriction_indices(&self, restriction: Restriction) -> Vec<usize> {
        match restriction {
            Restriction::All => (0..self.train.len()).collect(),
            Restriction::Head => self.train.indices_of(&self.split.head),
            Restriction::Tail => self.train.indices_of(&self.split.tail),
        }
    }

    /// Unweighted summed cross-entropy over a restriction of the training set;
    /// `None` if the restriction is empty.
    pub fn restriction_objective(&self, restriction: Restriction) -> Result<Option<MlpObjective<'_>>> {
        let idx = self.restriction_indices(restriction);
        if idx.is_empty() {
            return Ok(None);
        }
        Ok(Some(MlpObjective::unweighted(&self.spec, self.train.gather(&idx)?)))
    }

    fn part_objective(&self, indices: &[usize]) -> Result<Option<MlpObjective<'_>>> {
        if indices.is_empty() {
            return Ok(None);
        }
        let batch = self.train.gather(indices)?;
        let weights = batch.labels.iter().map(|&y| self.optim.class_weight(y)).collect();
        MlpObjective::new(&self.spec, batch, weights).map(Some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub epoch: usize,
    pub all: f64,
    pub head: f64,
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: String,
    pub config_hash: String,
    pub seeds: RunSeeds,
    pub optimizer: OptimizerKind,
    pub rho: f64,
    pub eta: usize,
    pub class_counts: Vec<usize>,
    pub head_classes: BTreeSet<usize>,
    pub eval_splits: EvalSplits,
    pub epochs: Vec<EpochLosses>,
    pub accuracy: ClassAccuracy,
    /// Only for two-class runs; class 1 is the positive (tail) class.
    pub binary: Option<BinaryMetrics>,
    pub sharpness: Vec<SharpnessReport>,
    pub test_set_hash: String,
    pub params_digest: String,
    pub grad_evals: u64,
    pub wall_clock_secs: f64,
}

impl RunResult {
    pub fn acc_all(&self) -> f64 {
        self.accuracy.all
    }

    pub fn sharpness_for(&self, restriction: Restriction) -> Option<&SharpnessReport> {
        self.sharpness.iter().find(|r| r.restriction == restriction)
    }

    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &RunResult) -> bool {
        let mut a = self.clone();
        a.wall_clock_secs = other.wall_clock_secs;
        &a == other
    }
}

/// A finished run: its report and final parameters.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub result: RunResult,
    pub params: ParamVector,
}

/// SHA-256 over the bit patterns of the parameters.
pub fn params_digest(params: &ParamVector) -> String {
    let mut h = Sha256::new();
    for v in params.values() {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn summed_loss(prep: &Prepared, params: &ParamVector, restriction: Restriction) -> Result<f64> {
    match prep.restriction_objective(restriction)? {
        Some(obj) => crate::objective::Objective::loss(&obj, params),
        None => Ok(0.0),
    }
}

/// One optimizer step on a batch, dispatching only on the update rule.
fn step(
    kind: OptimizerKind,
    state: &mut OptimState,
    optim: &OptimConfig,
    params: &mut ParamVector,
    parts: &BatchParts<'_>,
) -> Result<StepInfo> {
    use crate::objective::Objective;
    let full = |p: &ParamVector| parts.full.loss_and_grad(p);
    match kind {
        OptimizerKind::Sgd => sgd_step(state, optim, params, full),
        OptimizerKind::Sam => sam_step(state, optim, params, full),
        OptimizerKind::ImbSam => {
            let head = parts.head.as_ref().map(|o| move |p: &ParamVector| o.loss_and_grad(p));
            let tail = parts.tail.as_ref().map(|o| move |p: &ParamVector| o.loss_and_grad(p));
            imbsam_step(state, optim, params, head, tail, full)
        }
    }
}

/// Objectives of one batch. `full` keeps the batch order, so it does not
/// depend on the head/tail split.
struct BatchParts<'a> {
    full: MlpObjective<'a>,
    head: Option<MlpObjective<'a>>,
    tail: Option<MlpObjective<'a>>,
}

/// Trains from the shared initialization and returns the final parameters
/// with per-epoch losses and the gradient-evaluation count.
pub fn train(config: &ExperimentConfig, prep: &Prepared) -> Result<(ParamVector, Vec<EpochLosses>, u64)> {
    train_observed(config, prep, |_| Ok(()))
}

/// What the training loop is about to step on.
pub struct BatchView<'a> {
    pub epoch: usize,
    pub step: u64,
    pub params: &'a ParamVector,
    pub head: Option<&'a MlpObjective<'a>>,
    pub tail: Option<&'a MlpObjective<'a>>,
}

/// [`train`], calling `observe` before every step. The observer cannot change
/// the trajectory.
pub fn train_observed(
    config: &ExperimentConfig,
    prep: &Prepared,
    mut observe: impl FnMut(&BatchView<'_>) -> Result<()>,
) -> Result<(ParamVector, Vec<EpochLosses>, u64)> {
    let kind = config.optimizer.name;
    let mut params = prep.spec.init_params()?;
    let mut state = OptimState::for_params(&params);
    let mut epochs = Vec::with_capacity(config.training.epochs);
    let mut grad_evals = 0u64;
    for epoch in 0..config.training.epochs {
        for batch in batches(
            &prep.train,
            &prep.split,
            config.training.batch_size,
            prep.seeds.batch,
            epoch as u64,
        )? {
            let parts = BatchParts {
                full: prep.part_objective(&batch.indices)?.ok_or(Error::EmptyBatch)?,
                head: prep.part_objective(&batch.head)?,
                tail: prep.part_objective(&batch.tail)?,
            };
            let step_no = state.step();
            observe(&BatchView {
                epoch,
                step: step_no,
                params: &params,
                head: parts.head.as_ref(),
                tail: parts.tail.as_ref(),
            })?;
            let info = step(kind, &mut state, &prep.optim, &mut params, &parts)?;
            grad_evals += info.grad_evals as u64;
            if !info.loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step: step_no,
                    loss: info.loss,
                });
            }
        }
        let head = summed_loss(prep, &params, Restriction::Head)?;
        let tail = summed_loss(prep, &params, Restriction::Tail)?;
        if !(head + tail).is_finite() {
            return Err(Error::Diverged {
                epoch,
                step: state.step(),
                loss: head + tail,
            });
        }
        epochs.push(EpochLosses {
            epoch,
            all: head + tail,
            head,
            tail,
        });
    }
    Ok((params, epochs, grad_evals))
}

/// Sharpness of each configured restriction at `params`; empty restrictions are skipped.
pub fn sharpness_reports(
    config: &ExperimentConfig,
    prep: &Prepared,
    params: &ParamVector,
) -> Result<Vec<SharpnessReport>> {
    let settings = config.sharpness_settings(prep.seeds.probe);
    let mut out = Vec::new();
    for &r in &config.diagnostics.restrictions {
        if let Some(obj) = prep.restriction_objective(r)? {
            out.push(sharpness_report(&obj, r, params, &settings)?);
        }
    }
    Ok(out)
}

/// Binary ranking metrics on the test set, scoring by the class-1 probability.
pub fn binary_metrics(prep: &Prepared, params: &ParamVector) -> Result<BinaryMetrics> {
    let probs = prep.spec.probabilities(params, &prep.test.all()?.features)?;
    let scores: Vec<f64> = (0..probs.rows()).map(|i| probs.row(i)[1]).collect();
    let labels: Vec<bool> = prep.test.labels().iter().map(|&y| y == 1).collect();
    binary_rank_metrics(&scores, &labels)
}

/// Trains and evaluates one repeat seed.
pub fn run_seed(config: &ExperimentConfig, repeat: u64) -> Result<SeedRun> {
    let started = Instant::now();
    let prep = Prepared::new(config, repeat)?;
    let (params, epochs, grad_evals) = train(config, &prep)?;
    let accuracy = per_class_accuracy(&prep.spec, &params, &prep.test, &prep.eval_splits)?;
    let binary = if prep.spec.num_classes == 2 {
        Some(binary_metrics(&prep, &params)?)
    } else {
        None
    };
    let sharpness = if config.diagnostics.enabled {
        sharpness_reports(config, &prep, &params)?
    } else {
        Vec::new()
    };
    let result = RunResult {
        run_id: format!("{}-{}-s{}", config.name, config.optimizer.name, repeat),
        config_hash: config.hash(),
        seeds: prep.seeds,
        optimizer: config.optimizer.name,
        rho: config.optimizer.rho,
        eta: config.split.eta,
        class_counts: prep.train.class_counts().to_vec(),
        head_classes: prep.split.head.clone(),
        eval_splits: prep.eval_splits.clone(),
        epochs,
        accuracy,
        binary,
        sharpness,
        test_set_hash: prep.test.content_hash(),
        params_digest: params_digest(&params),
        grad_evals,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok(SeedRun { result, params })
}

/// Runs every repeat seed of the config. Seeds run in parallel; the output is
/// in config order and does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<SeedRun>> {
    config.validate()?;
    config.seeds.par_iter().map(|&s| run_seed(config, s)).collect()
}

/// Per-class accuracy deltas of `b` over `a`; both runs must share the class
/// count and the test set.
pub fn accuracy_gain_report(a: &RunResult, b: &RunResult) -> Result<GainReport> {
    if a.class_counts.len() != b.class_counts.len() {
        return Err(Error::Incomparable("different number of classes".into()));
    }
    if a.test_set_hash != b.test_set_hash {
        return Err(Error::Incomparable("different test sets".into()));
    }
    accuracy_gain(&a.accuracy, &b.accuracy, &a.eval_splits)
}

/// Loss slices of the configured restrictions around `params`, along unit
/// `directions`.
pub fn landscape(
    prep: &Prepared,
    params: &ParamVector,
    restrictions: &[Restriction],
    directions: &[crate::params::GradVector],
    half_width: f64,
    grid_points: usize,
) -> Result<crate::diagnostics::LandscapeSlice> {
    let objectives: Vec<(Restriction, MlpObjective<'_>)> = restrictions
        .iter()
        .filter_map(|&r| prep.restriction_objective(r).transpose().map(|o| o.map(|o| (r, o))))
        .collect::<Result<_>>()?;
    let refs: Vec<(Restriction, &(dyn crate::objective::Objective + Sync))> = objectives
        .iter()
        .map(|(r, o)| (*r, o as &(dyn crate::objective::Objective + Sync)))
        .collect();
    crate::diagnostics::landscape_slice(&refs, params, directions, half_width, grid_points)
}
