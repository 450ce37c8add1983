use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use imbsam_core::data::{generate_balanced_test, generate_longtailed};
use imbsam_core::diagnostics::{random_direction, sharpness_report, Restriction};
use imbsam_core::harness::{
    ablation_grid, accuracy_gain_report, landscape, output, presets, run_experiment, Checkpoint, ExperimentConfig,
    Prepared, RunResult,
};
use imbsam_core::optim::OptimizerKind;
use imbsam_core::{GradVector, Objective};

#[derive(Parser)]
#[command(
    name = "imbsam",
    version,
    about = "SGD, SAM and ImbSAM on synthetic long-tailed data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the training set (and optionally the balanced test set) of a config as CSV.
    Generate {
        #[command(flatten)]
        source: ConfigSource,
        /// Repeat seed whose data to generate.
        #[arg(long, default_value_t = 0)]
        repeat: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        test_out: Option<PathBuf>,
    },
    /// Train every repeat seed and write results, tables and checkpoints.
    Train {
        #[command(flatten)]
        source: ConfigSource,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory; defaults to the config's `output_dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        no_checkpoints: bool,
    },
    /// Sharpness and loss-landscape slices at a checkpoint.
    Diagnose {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Slice directions.
        #[arg(long, value_enum, default_value_t = Direction::Random)]
        direction: Direction,
        /// 1 for a line, 2 for a plane.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        dims: u8,
        #[arg(long, default_value_t = 1.0)]
        half_width: f64,
        /// Points per axis (odd).
        #[arg(long, default_value_t = 21)]
        grid_points: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [Restriction::All, Restriction::Head, Restriction::Tail])]
        restrictions: Vec<Restriction>,
    },
    /// Run a ρ × η ablation grid over every repeat seed.
    Grid {
        #[command(flatten)]
        source: ConfigSource,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_delimiter = ',', required = true)]
        rho: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        eta: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-class accuracy gains of a candidate run over a baseline run.
    Compare {
        baseline: PathBuf,
        candidate: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ConfigSource {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset: desk_lt10 or binary_anomaly.
    #[arg(long)]
    preset: Option<String>,
}

impl ConfigSource {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => {
                ExperimentConfig::load(path).with_context(|| format!("loading config {}", path.display()))
            }
            (None, Some(name)) => presets::load(name).with_context(|| format!("unknown preset '{name}'")),
            (None, None) => bail!("pass --config or --preset"),
        }
    }
}

#[derive(Args)]
struct Overrides {
    #[arg(long, value_parser = parse_optimizer)]
    optimizer: Option<OptimizerKind>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    no_diagnostics: bool,
}

impl Overrides {
    fn apply(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(o) = self.optimizer {
            cfg.optimizer.name = o;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(e) = self.epochs {
            cfg.training.epochs = e;
        }
        if self.no_diagnostics {
            cfg.diagnostics.enabled = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    s.parse().map_err(|e: imbsam_core::Error| e.to_string())
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    /// Seeded Gaussian directions.
    Random,
    /// The normalized full-loss gradient (plus a random direction for planes).
    Gradient,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn generate(cfg: &ExperimentConfig, repeat: u64, out: &Path, test_out: Option<&Path>) -> Result<()> {
    let seeds = cfg.seeds_for(repeat);
    let spec = cfg.dataset_spec(seeds.data);
    let train = generate_longtailed(&spec)?;
    train.write_csv(create(out)?)?;
    println!(
        "wrote {} training samples, class counts {:?}",
        train.len(),
        train.class_counts()
    );
    if let Some(path) = test_out {
        let test = generate_balanced_test(&spec, cfg.dataset.test_per_class)?;
        test.write_csv(create(path)?)?;
        println!("wrote {} test samples", test.len());
    }
    Ok(())
}

fn train(cfg: &ExperimentConfig, out_dir: &Path, checkpoints: bool) -> Result<()> {
    let runs = run_experiment(cfg)?;
    fs::create_dir_all(out_dir)?;
    for run in &runs {
        let r = &run.result;
        output::write_result_json(create(&out_dir.join(format!("{}.json", r.run_id)))?, r)?;
        if checkpoints {
            let ck = Checkpoint {
                config: cfg.clone(),
                repeat: r.seeds.repeat,
                spec: cfg.mlp_spec(r.seeds.init),
                params: run.params.clone(),
            };
            ck.write(create(&out_dir.join(format!("{}.ckpt", r.run_id)))?)?;
        }
    }
    let results: Vec<&RunResult> = runs.iter().map(|r| &r.result).collect();
    let prefix = format!("{}-{}", cfg.name, cfg.optimizer.name);
    output::write_summary_csv(create(&out_dir.join(format!("{prefix}-summary.csv")))?, &results)?;
    output::write_per_class_csv(create(&out_dir.join(format!("{prefix}-per_class.csv")))?, &results)?;
    output::write_epoch_csv(create(&out_dir.join(format!("{prefix}-epochs.csv")))?, &results)?;
    if cfg.diagnostics.enabled {
        output::write_sharpness_csv(create(&out_dir.join(format!("{prefix}-sharpness.csv")))?, &results)?;
    }
    for r in &results {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        println!(
            "{}: all {:.4} many {} medium {} few {}",
            r.run_id,
            r.accuracy.all,
            fmt(r.accuracy.many),
            fmt(r.accuracy.medium),
            fmt(r.accuracy.few)
        );
    }
    println!("results in {}", out_dir.display());
    Ok(())
}

struct DiagnoseArgs<'a> {
    checkpoint: &'a Path,
    out_dir: &'a Path,
    direction: Direction,
    dims: u8,
    half_width: f64,
    grid_points: usize,
    restrictions: &'a [Restriction],
}

fn diagnose(a: DiagnoseArgs<'_>) -> Result<()> {
    let ck = Checkpoint::read(BufReader::new(
        File::open(a.checkpoint).with_context(|| format!("opening {}", a.checkpoint.display()))?,
    ))?;
    let cfg = &ck.config;
    let prep = Prepared::new(cfg, ck.repeat)?;
    if prep.spec != ck.spec {
        bail!("checkpoint model spec does not match its config");
    }
    let run_id = format!("{}-{}-s{}", cfg.name, cfg.optimizer.name, ck.repeat);
    let config_hash = cfg.hash();
    let settings = cfg.sharpness_settings(prep.seeds.probe);

    let mut reports = Vec::new();
    for &r in a.restrictions {
        if let Some(obj) = prep.restriction_objective(r)? {
            reports.push(sharpness_report(&obj, r, &ck.params, &settings)?);
        }
    }
    fs::create_dir_all(a.out_dir)?;
    output::write_sharpness_reports_csv(
        create(&a.out_dir.join(format!("{run_id}-sharpness.csv")))?,
        &run_id,
        &config_hash,
        ck.repeat,
        &reports,
    )?;

    let mut directions: Vec<GradVector> = Vec::new();
    if let Direction::Gradient = a.direction {
        let obj = prep
            .restriction_objective(Restriction::All)?
            .context("empty training set")?;
        directions.push(obj.loss_and_grad(&ck.params)?.1);
    }
    let mut k = 0;
    while directions.len() < a.dims as usize {
        directions.push(random_direction(&ck.params, settings.seed.wrapping_add(k))?);
        k += 1;
    }
    let slice = landscape(
        &prep,
        &ck.params,
        a.restrictions,
        &directions,
        a.half_width,
        a.grid_points,
    )?;
    output::write_landscape_csv(
        create(&a.out_dir.join(format!("{run_id}-landscape.csv")))?,
        &run_id,
        &config_hash,
        ck.repeat,
        &slice,
    )?;
    for s in &reports {
        println!(
            "{run_id} {}: lambda_max {:.4} trace {:.4} ± {:.4}",
            s.restriction, s.lambda_max, s.trace, s.trace_std_error
        );
    }
    println!(
        "wrote {} landscape points to {}",
        slice.points.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn compare(baseline: &Path, candidate: &Path, out: &Path) -> Result<()> {
    let read = |p: &Path| -> Result<RunResult> {
        Ok(output::read_result_json(BufReader::new(
            File::open(p).with_context(|| format!("opening {}", p.display()))?,
        ))?)
    };
    let (a, b) = (read(baseline)?, read(candidate)?);
    let gains = accuracy_gain_report(&a, &b)?;
    output::write_gain_csv(create(out)?, &a, &b, &gains)?;
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:+.2}", 100.0 * x));
    println!(
        "{} -> {}: all {:+.2} many {} medium {} few {} (points)",
        a.run_id,
        b.run_id,
        100.0 * gains.all,
        fmt(gains.many),
        fmt(gains.medium),
        fmt(gains.few)
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate {
            source,
            repeat,
            out,
            test_out,
        } => generate(&source.load()?, repeat, &out, test_out.as_deref()),
        Command::Train {
            source,
            overrides,
            out_dir,
            no_checkpoints,
        } => {
            let cfg = overrides.apply(source.load()?)?;
            let dir = out_dir.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
            train(&cfg, &dir, !no_checkpoints)
        }
        Command::Diagnose {
            checkpoint,
            out_dir,
            direction,
            dims,
            half_width,
            grid_points,
            restrictions,
        } => diagnose(DiagnoseArgs {
            checkpoint: &checkpoint,
            out_dir: &out_dir,
            direction,
            dims,
            half_width,
            grid_points,
            restrictions: &restrictions,
        }),
        Command::Grid {
            source,
            overrides,
            rho,
            eta,
            out,
        } => {
            let cfg = overrides.apply(source.load()?)?;
            let rows = ablation_grid(&cfg, &rho, &eta)?;
            output::write_grid_csv(create(&out)?, &rows)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!("wrote {} grid rows ({failed} failed) to {}", rows.len(), out.display());
            Ok(())
        }
        Command::Compare {
            baseline,
            candidate,
            out,
        } => compare(&baseline, &candidate, &out),
    }
}
