use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::run_seed;
use crate::error::{Error, Result};

/// One (ρ, η, seed) cell of an ablation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub rho: f64,
    pub eta: usize,
    pub seed: u64,
    pub config_hash: String,
    pub optimizer: String,
    pub acc_all: Option<f64>,
    pub acc_many: Option<f64>,
    pub acc_medium: Option<f64>,
    pub acc_few: Option<f64>,
    pub params_digest: Option<String>,
    pub error: Option<String>,
}

/// Runs the base config for every `(ρ, η)` pair and every repeat seed.
///
/// Dataset and initialization seeds are shared across cells. A failing cell
/// records its error and the rest of the grid still runs. Rows are ordered
/// by ρ, then η, then seed.
pub fn ablation_grid(base: &ExperimentConfig, rhos: &[f64], etas: &[usize]) -> Result<Vec<GridRow>> {
    if rhos.is_empty() || etas.is_empty() {
        return Err(Error::invalid("ablation grid needs at least one rho and one eta"));
    }
    base.validate()?;
    let cells: Vec<(f64, usize, u64)> = rhos
        .iter()
        .flat_map(|&r| {
            etas.iter()
                .flat_map(move |&e| base.seeds.iter().map(move |&s| (r, e, s)))
        })
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(rho, eta, seed)| {
            let mut cfg = base.clone();
            cfg.optimizer.rho = rho;
            cfg.split.eta = eta;
            let config_hash = cfg.hash();
            let mut row = GridRow {
                rho,
                eta,
                seed,
                config_hash,
                optimizer: cfg.optimizer.name.to_string(),
                acc_all: None,
                acc_many: None,
                acc_medium: None,
                acc_few: None,
                params_digest: None,
                error: None,
            };
            match run_seed(&cfg, seed) {
                Ok(run) => {
                    let acc = &run.result.accuracy;
                    row.acc_all = Some(acc.all);
                    row.acc_many = acc.many;
                    row.acc_medium = acc.medium;
                    row.acc_few = acc.few;
                    row.params_digest = Some(run.result.params_digest);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect())
}
