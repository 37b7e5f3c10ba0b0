//! Argument surface and subcommand dispatch for the `pcl` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use pcl_core::two_stage::{default_lambda_grid, tune_lambdas_table, DfpvArch, FixedDictionaries, TuneTarget};

use crate::config::{DgpKind, EstimatorKind, ExperimentConfig, PolicyKind};
use crate::dataset::write_dataset;
use crate::error::{validation, CliResult};
use crate::fmt::g6;
use crate::runner;
use crate::schema::{read_truth_csv, write_truth_csv, ModelJson, SidecarJson, TrainConfigJson};

#[derive(Debug, Parser)]
#[command(
    name = "pcl",
    version,
    about = "Two-stage proxy causal learning: estimators, synthetic benchmarks, policy evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (CSV plus a JSON sidecar)
    Gen {
        #[arg(long)]
        dgp: DgpKind,
        /// Per-stage sample count
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit one estimator on one synthetic dataset and save the model
    Train {
        #[arg(long)]
        dgp: DgpKind,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        estimator: EstimatorKind,
        /// TOML or JSON file of training settings (flat TrainConfig
        /// fields, all optional)
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Mean squared error of a saved model over a truth table
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Off-policy evaluation study on the demand design
    Ope {
        /// Experiment config (TOML or JSON)
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        policy: PolicyKind,
        /// Overrides output_dir from the config
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regularization grid search for one dataset and estimator
    Tune {
        #[arg(long)]
        dgp: DgpKind,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        estimator: EstimatorKind,
        #[arg(long, default_value_t = 100)]
        max_centers: usize,
    },
    /// Full multi-seed experiment from a config file
    Bench {
        /// Experiment config (TOML or JSON)
        #[arg(long)]
        config: PathBuf,
        /// Overrides output_dir from the config
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen { dgp, size, seed, out } => cmd_gen(dgp, size, seed, &out),
        Command::Train { dgp, size, seed, estimator, config, out } => {
            cmd_train(dgp, size, seed, estimator, config.as_deref(), &out)
        }
        Command::Eval { model, truth } => cmd_eval(&model, &truth),
        Command::Ope { config, policy, out } => cmd_ope(&config, policy, out),
        Command::Tune { dgp, size, seed, estimator, max_centers } => {
            cmd_tune(dgp, size, seed, estimator, max_centers)
        }
        Command::Bench { config, out } => cmd_bench(&config, out),
    }
}

fn cmd_gen(dgp: DgpKind, size: usize, seed: u64, out: &Path) -> CliResult<()> {
    if size == 0 {
        return Err(validation("--size must be at least 1"));
    }
    let (data, truth) = runner::generate_data(dgp, size, seed)?;
    fs::create_dir_all(out)?;
    let stem = format!("{}_{}_{}", dgp.name(), size, seed);
    let csv_path = out.join(format!("{stem}.csv"));
    let sidecar = SidecarJson {
        dgp: dgp.name().to_string(),
        seed,
        stage1_rows: data.m(),
        stage2_rows: data.n(),
        noise_convention: "variance".to_string(),
    };
    write_dataset(&csv_path, &out.join(format!("{stem}.json")), &data, &sidecar)?;
    // The surrogate's truth depends on the data seed, so it is only
    // available here; the other designs get theirs from `bench`.
    if let Some(truth) = truth {
        write_truth_csv(&out.join(format!("truth_{stem}.csv")), &truth)?;
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn load_train_config(path: Option<&Path>) -> CliResult<TrainConfigJson> {
    let Some(path) = path else {
        return Ok(TrainConfigJson::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| validation(format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|x| x == "json") {
        serde_json::from_str(&text).map_err(|e| validation(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| validation(format!("{}: {e}", path.display())))?
    };
    Ok(parsed)
}

fn cmd_train(
    dgp: DgpKind,
    size: usize,
    seed: u64,
    estimator: EstimatorKind,
    config: Option<&Path>,
    out: &Path,
) -> CliResult<()> {
    if size == 0 {
        return Err(validation("--size must be at least 1"));
    }
    let cfg = ExperimentConfig {
        train: load_train_config(config)?,
        ..ExperimentConfig::single(dgp, estimator, size, seed)
    };
    let (outcome, truth) = runner::fit_single(&cfg, estimator, size, seed)?;
    fs::create_dir_all(out)?;
    let stem = format!("{}_{}_{}_{}", dgp.name(), estimator.name(), size, seed);
    let model_path = out.join(format!("{stem}.json"));
    outcome.model.expect("single fits always keep the model").save(&model_path)?;
    let truth_path = out.join(format!("truth_{stem}.csv"));
    write_truth_csv(&truth_path, &truth)?;
    println!("wrote {}", model_path.display());
    println!("wrote {}", truth_path.display());
    println!("oos_mse {}", outcome.oos_mse);
    Ok(())
}

fn cmd_eval(model_path: &Path, truth_path: &Path) -> CliResult<()> {
    let model = ModelJson::load(model_path)?.to_model()?;
    let truth = read_truth_csv(truth_path)?;
    let mse = runner::grid_mse(|a| Ok(model.predict_structural(a)?), &truth)?;
    println!("oos_mse {mse}");
    Ok(())
}

fn cmd_ope(config: &Path, policy: PolicyKind, out: Option<PathBuf>) -> CliResult<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    let output = runner::run_ope_experiment(&cfg, policy)?;
    runner::write_ope_outputs(&output, &cfg.output_dir)?;
    println!(
        "v_true({}) = {} (mc stderr {})",
        output.policy,
        g6(output.v_true),
        g6(output.v_true_stderr)
    );
    println!(
        "wrote {} ({} rows, {} failures)",
        cfg.output_dir.join("ope_results.csv").display(),
        output.results.len(),
        output.failures.len()
    );
    Ok(())
}

fn cmd_tune(
    dgp: DgpKind,
    size: usize,
    seed: u64,
    estimator: EstimatorKind,
    max_centers: usize,
) -> CliResult<()> {
    if size == 0 {
        return Err(validation("--size must be at least 1"));
    }
    if max_centers == 0 {
        return Err(validation("--max-centers must be at least 1"));
    }
    let (data, _) = runner::generate_data(dgp, size, seed)?;
    let grid = default_lambda_grid();
    let arch = DfpvArch::uniform(&[32, 16, 8]);
    let train = TrainConfigJson::default().to_config();
    let (best, table) = match estimator {
        EstimatorKind::FixedFeature => {
            let dicts = FixedDictionaries::from_stage1(&data, max_centers, seed)?;
            tune_lambdas_table(&data, TuneTarget::FixedFeature(&dicts), &grid)?
        }
        EstimatorKind::Dfpv => {
            tune_lambdas_table(&data, TuneTarget::Dfpv { arch: &arch, config: &train }, &grid)?
        }
    };
    println!("lambda1,lambda2,stage1_oos,stage2_oos");
    for e in &table {
        println!("{},{},{},{}", g6(e.lambda1), g6(e.lambda2), g6(e.stage1_oos), g6(e.stage2_oos));
    }
    println!("best lambda1={} lambda2={}", g6(best.0), g6(best.1));
    Ok(())
}

fn cmd_bench(config: &Path, out: Option<PathBuf>) -> CliResult<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    let output = runner::run_structural_experiment(&cfg)?;
    runner::write_structural_outputs(&output, &cfg.output_dir)?;
    println!("dgp,estimator,size,count,median_mse,q25_mse,q75_mse");
    for s in &output.summary {
        println!(
            "{},{},{},{},{},{},{}",
            s.dgp,
            s.estimator,
            s.size,
            s.count,
            g6(s.median),
            g6(s.q25),
            g6(s.q75)
        );
    }
    println!(
        "wrote {} ({} runs, {} failures)",
        cfg.output_dir.join("results.csv").display(),
        output.results.len(),
        output.failures.len()
    );
    Ok(())
}
