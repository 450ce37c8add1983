//! Trains SGD, SAM and ImbSAM on a preset (or a config file given as the
//! first argument) and prints seed-mean accuracies and tail sharpness.
//!
//! `cargo run --release -p imbsam-core --example compare_optimizers [config.toml]`

use imbsam_core::diagnostics::Restriction;
use imbsam_core::harness::{presets, run_experiment, ExperimentConfig};
use imbsam_core::optim::OptimizerKind;

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(path)?,
        None => presets::desk_lt10(),
    };
    println!(
        "{:<8} {:>7} {:>7} {:>7} {:>7} {:>10} {:>10} {:>8}",
        "opt", "all", "many", "medium", "few", "tail_lmax", "tail_tr", "secs"
    );
    for kind in [OptimizerKind::Sgd, OptimizerKind::Sam, OptimizerKind::ImbSam] {
        let cfg = base.with_optimizer(kind);
        let runs = run_experiment(&cfg)?;
        let res: Vec<_> = runs.iter().map(|r| &r.result).collect();
        let tail = |f: fn(&imbsam_core::diagnostics::SharpnessReport) -> f64| {
            mean(res.iter().filter_map(|r| r.sharpness_for(Restriction::Tail)).map(f))
        };
        println!(
            "{:<8} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>10.4} {:>10.4} {:>8.2}",
            kind.name(),
            mean(res.iter().map(|r| r.accuracy.all)),
            mean(res.iter().filter_map(|r| r.accuracy.many)),
            mean(res.iter().filter_map(|r| r.accuracy.medium)),
            mean(res.iter().filter_map(|r| r.accuracy.few)),
            tail(|s| s.lambda_max),
            tail(|s| s.trace),
            res.iter().map(|r| r.wall_clock_secs).sum::<f64>(),
        );
        if res[0].binary.is_some() {
            println!(
                "         auc_roc {:.4}  aucpr_anomaly {:.4}  aucpr_normal {:.4}",
                mean(res.iter().filter_map(|r| r.binary.map(|b| b.auc_roc))),
                mean(res.iter().filter_map(|r| r.binary.map(|b| b.auc_pr_anomaly))),
                mean(res.iter().filter_map(|r| r.binary.map(|b| b.auc_pr_normal))),
            );
        }
    }
    Ok(())
}
