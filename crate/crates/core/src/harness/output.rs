//! CSV and JSON writers for run results, sharpness reports, landscape slices,
//! grids and gain reports. Every row carries the config hash and seed it came
//! from.

use std::io::Write;

use serde::Serialize;

use super::grid::GridRow;
use super::run::RunResult;
use crate::data::EvalSplits;
use crate::diagnostics::{LandscapeSlice, SharpnessReport};
use crate::error::Result;
use crate::metrics::GainReport;

fn split_name(splits: &EvalSplits, k: usize) -> &'static str {
    if splits.many.contains(&k) {
        "many"
    } else if splits.few.contains(&k) {
        "few"
    } else {
        "medium"
    }
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    run_id: &'a str,
    config_hash: &'a str,
    seed: u64,
    optimizer: &'a str,
    rho: f64,
    eta: usize,
    acc_all: f64,
    acc_many: Option<f64>,
    acc_medium: Option<f64>,
    acc_few: Option<f64>,
    auc_roc: Option<f64>,
    auc_pr_anomaly: Option<f64>,
    auc_pr_normal: Option<f64>,
    final_loss: Option<f64>,
    grad_evals: u64,
}

/// One summary row per run.
pub fn write_summary_csv<W: Write>(w: W, results: &[&RunResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in results {
        out.serialize(SummaryRow {
            run_id: &r.run_id,
            config_hash: &r.config_hash,
            seed: r.seeds.repeat,
            optimizer: r.optimizer.name(),
            rho: r.rho,
            eta: r.eta,
            acc_all: r.accuracy.all,
            acc_many: r.accuracy.many,
            acc_medium: r.accuracy.medium,
            acc_few: r.accuracy.few,
            auc_roc: r.binary.map(|b| b.auc_roc),
            auc_pr_anomaly: r.binary.map(|b| b.auc_pr_anomaly),
            auc_pr_normal: r.binary.map(|b| b.auc_pr_normal),
            final_loss: r.epochs.last().map(|e| e.all),
            grad_evals: r.grad_evals,
        })?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ClassRow<'a> {
    run_id: &'a str,
    config_hash: &'a str,
    seed: u64,
    class: usize,
    train_count: usize,
    split: &'a str,
    head: bool,
    accuracy: f64,
}

/// One row per (run, class).
pub fn write_per_class_csv<W: Write>(w: W, results: &[&RunResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in results {
        for (k, &acc) in r.accuracy.per_class.iter().enumerate() {
            out.serialize(ClassRow {
                run_id: &r.run_id,
                config_hash: &r.config_hash,
                seed: r.seeds.repeat,
                class: k,
                train_count: r.class_counts[k],
                split: split_name(&r.eval_splits, k),
                head: r.head_classes.contains(&k),
                accuracy: acc,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EpochRow<'a> {
    run_id: &'a str,
    config_hash: &'a str,
    seed: u64,
    epoch: usize,
    loss_all: f64,
    loss_head: f64,
    loss_tail: f64,
}

pub fn write_epoch_csv<W: Write>(w: W, results: &[&RunResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in results {
        for e in &r.epochs {
            out.serialize(EpochRow {
                run_id: &r.run_id,
                config_hash: &r.config_hash,
                seed: r.seeds.repeat,
                epoch: e.epoch,
                loss_all: e.all,
                loss_head: e.head,
                loss_tail: e.tail,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SharpnessRow<'a> {
    run_id: &'a str,
    config_hash: &'a str,
    seed: u64,
    restriction: &'a str,
    lambda_max: f64,
    trace: f64,
    trace_std_error: f64,
    probes_used: usize,
    power_iters: usize,
    converged: bool,
    data: &'a str,
}

pub fn write_sharpness_csv<W: Write>(w: W, results: &[&RunResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in results {
        sharpness_rows(&mut out, &r.run_id, &r.config_hash, r.seeds.repeat, &r.sharpness)?;
    }
    out.flush()?;
    Ok(())
}

/// Sharpness reports computed outside a run, e.g. from a checkpoint.
pub fn write_sharpness_reports_csv<W: Write>(
    w: W,
    run_id: &str,
    config_hash: &str,
    seed: u64,
    reports: &[SharpnessReport],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    sharpness_rows(&mut out, run_id, config_hash, seed, reports)?;
    out.flush()?;
    Ok(())
}

fn sharpness_rows<W: Write>(
    out: &mut csv::Writer<W>,
    run_id: &str,
    config_hash: &str,
    seed: u64,
    reports: &[SharpnessReport],
) -> Result<()> {
    for s in reports {
        out.serialize(SharpnessRow {
            run_id,
            config_hash,
            seed,
            restriction: s.restriction.name(),
            lambda_max: s.lambda_max,
            trace: s.trace,
            trace_std_error: s.trace_std_error,
            probes_used: s.probes_used,
            power_iters: s.power_iters,
            converged: s.converged,
            data: "train-full",
        })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SliceRow<'a> {
    run_id: &'a str,
    config_hash: &'a str,
    seed: u64,
    restriction: &'a str,
    alpha: f64,
    beta: Option<f64>,
    loss: f64,
}

pub fn write_landscape_csv<W: Write>(
    w: W,
    run_id: &str,
    config_hash: &str,
    seed: u64,
    slice: &LandscapeSlice,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in &slice.points {
        out.serialize(SliceRow {
            run_id,
            config_hash,
            seed,
            restriction: p.restriction.name(),
            alpha: p.alpha,
            beta: p.beta,
            loss: p.loss,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_grid_csv<W: Write>(w: W, rows: &[GridRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct GainRow<'a> {
    baseline: &'a str,
    candidate: &'a str,
    group: String,
    delta: Option<f64>,
}

/// Per-class deltas in class order, then the `all/many/medium/few` aggregates.
pub fn write_gain_csv<W: Write>(w: W, baseline: &RunResult, candidate: &RunResult, gains: &GainReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let row = |group: String, delta: Option<f64>| GainRow {
        baseline: &baseline.run_id,
        candidate: &candidate.run_id,
        group,
        delta,
    };
    for (k, &d) in gains.per_class.iter().enumerate() {
        out.serialize(row(format!("class_{k}"), Some(d)))?;
    }
    out.serialize(row("all".into(), Some(gains.all)))?;
    out.serialize(row("many".into(), gains.many))?;
    out.serialize(row("medium".into(), gains.medium))?;
    out.serialize(row("few".into(), gains.few))?;
    out.flush()?;
    Ok(())
}

pub fn write_result_json<W: Write>(w: W, result: &RunResult) -> Result<()> {
    serde_json::to_writer_pretty(w, result)?;
    Ok(())
}

pub fn read_result_json<R: std::io::Read>(r: R) -> Result<RunResult> {
    Ok(serde_json::from_reader(r)?)
}
