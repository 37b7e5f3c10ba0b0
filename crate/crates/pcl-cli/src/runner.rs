//! The benchmark engine behind `bench` and `ope`: enumerate (size, seed,
//! estimator) cells, fit each in a worker pool, score against ground
//! truth, and write the report files. Workers own their data and models;
//! only the collector (the calling thread) touches the filesystem, and
//! results are ordered by job index, so output bytes are a pure function
//! of the config.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use pcl_core::causal::estimate_value;
use pcl_core::datagen::{
    demand_context_for, demand_truth_mc, gen_demand, gen_demand_with_ope, gen_dsprite_surrogate,
    gen_mastouri, mastouri_truth, ope_truth_mc, GroundTruth, ObservationSet,
};
use pcl_core::features::RbfDictionary;
use pcl_core::numkit::mean;
use pcl_core::rng::mix_seed;
use pcl_core::two_stage::{
    fit_fixed_feature, fit_stage2_weights, train_dfpv, tune_lambdas, DfpvArch, FixedDictionaries,
    TuneTarget,
};

use crate::config::{DgpKind, EstimatorKind, ExperimentConfig, PolicyKind};
use crate::error::{validation, CliResult};
use crate::fmt::g6;
use crate::plot::mse_plot;
use crate::schema::{write_truth_csv, ModelJson};
use crate::summary::{summarize, SummaryRow};

/// Monte-Carlo budget and fixed seed for truth oracles; constants so the
/// same truth files fall out of every config.
const TRUTH_MC_DRAWS: usize = 200_000;
const TRUTH_MC_SEED: u64 = 0x7275_7468;
const DIRECT_RIDGE_LAMBDA: f64 = 0.1;
const DIRECT_RIDGE_STREAM: u64 = 0xd1;
const DSPRITE_EMBED_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub dgp: String,
    pub estimator: String,
    pub size: usize,
    pub seed: u64,
    pub oos_mse: f64,
    pub wall_time_s: f64,
    pub l1: f64,
    pub l2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone)]
pub struct RunFailure {
    pub dgp: String,
    pub estimator: String,
    pub size: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub results: Vec<RunResult>,
    pub failures: Vec<RunFailure>,
    pub summary: Vec<SummaryRow>,
    /// Truth tables by file stem; shared per dgp, per seed for the
    /// surrogate whose embedding depends on the data seed.
    pub truths: BTreeMap<String, GroundTruth>,
    pub models: Vec<(String, ModelJson)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpeResult {
    pub dgp: String,
    pub policy: String,
    pub estimator: String,
    pub size: usize,
    pub seed: u64,
    pub v_hat: f64,
    pub v_true: f64,
    pub sq_err: f64,
    pub wall_time_s: f64,
}

#[derive(Debug)]
pub struct OpeOutput {
    pub policy: String,
    pub results: Vec<OpeResult>,
    pub failures: Vec<RunFailure>,
    pub v_true: f64,
    pub v_true_stderr: f64,
}

pub fn generate_data(dgp: DgpKind, size: usize, seed: u64) -> CliResult<(ObservationSet, Option<GroundTruth>)> {
    match dgp {
        DgpKind::Demand => Ok((gen_demand(size, size, seed)?, None)),
        DgpKind::Mastouri => Ok((gen_mastouri(size, size, seed)?, None)),
        DgpKind::DspriteSurrogate => {
            let (data, truth) = gen_dsprite_surrogate(size, size, DSPRITE_EMBED_DIM, seed)?;
            Ok((data, Some(truth)))
        }
    }
}

/// Truth shared by every run of a dgp; the surrogate has none (per-seed).
pub fn shared_truth(dgp: DgpKind) -> CliResult<Option<GroundTruth>> {
    match dgp {
        DgpKind::Demand => Ok(Some(demand_truth_mc(TRUTH_MC_DRAWS, TRUTH_MC_SEED)?)),
        DgpKind::Mastouri => Ok(Some(mastouri_truth()?)),
        DgpKind::DspriteSurrogate => Ok(None),
    }
}

pub fn grid_mse(predict: impl Fn(&[f64]) -> CliResult<f64>, truth: &GroundTruth) -> CliResult<f64> {
    let mut acc = 0.0;
    for i in 0..truth.grid.rows() {
        let f = predict(truth.grid.row(i))?;
        let d = f - truth.values[i];
        acc += d * d;
    }
    Ok(acc / truth.grid.rows() as f64)
}

pub struct FitOutcome {
    pub oos_mse: f64,
    pub l1: f64,
    pub l2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub model: Option<ModelJson>,
}

/// One (estimator, size, seed) cell through the same code path `bench`
/// uses, so a model trained here reproduces the benched numbers exactly.
pub fn fit_single(
    cfg: &ExperimentConfig,
    estimator: EstimatorKind,
    size: usize,
    seed: u64,
) -> CliResult<(FitOutcome, GroundTruth)> {
    let (data, own_truth) = generate_data(cfg.dgp, size, seed)?;
    let truth = match own_truth {
        Some(t) => t,
        None => shared_truth(cfg.dgp)?.expect("every dgp has a truth source"),
    };
    let outcome = match estimator {
        EstimatorKind::Dfpv => fit_dfpv(&data, &truth, cfg, seed)?,
        EstimatorKind::FixedFeature => fit_fixed(&data, &truth, cfg, seed)?,
    };
    Ok((outcome, truth))
}

fn fit_dfpv(data: &ObservationSet, truth: &GroundTruth, cfg: &ExperimentConfig, seed: u64) -> CliResult<FitOutcome> {
    let arch = DfpvArch::uniform(&[32, 16, 8]);
    let mut train = cfg.train.to_config();
    train.seed = seed;
    if let Some(grid) = &cfg.tune {
        let (l1, l2) = tune_lambdas(data, TuneTarget::Dfpv { arch: &arch, config: &train }, grid)?;
        train.lambda1 = l1;
        train.lambda2 = l2;
    }
    let (model, report) = train_dfpv(data, &arch, &train)?;
    let oos_mse = grid_mse(|a| Ok(model.predict_structural(a)?), truth)?;
    Ok(FitOutcome {
        oos_mse,
        l1: report.final_l1,
        l2: report.final_l2,
        lambda1: train.lambda1,
        lambda2: train.lambda2,
        model: Some(ModelJson::from_dfpv(&model)),
    })
}

fn fit_fixed(data: &ObservationSet, truth: &GroundTruth, cfg: &ExperimentConfig, seed: u64) -> CliResult<FitOutcome> {
    let dicts = FixedDictionaries::from_stage1(data, cfg.max_centers, seed)?;
    let (mut lambda1, mut lambda2) = (cfg.train.lambda1, cfg.train.lambda2);
    if let Some(grid) = &cfg.tune {
        let picked = tune_lambdas(data, TuneTarget::FixedFeature(&dicts), grid)?;
        lambda1 = picked.0;
        lambda2 = picked.1;
    }
    let model = fit_fixed_feature(data, &dicts, lambda1, lambda2)?;
    let oos_mse = grid_mse(|a| Ok(model.predict_structural(a)?), truth)?;
    let (l1, l2) = model.losses();
    Ok(FitOutcome {
        oos_mse,
        l1,
        l2,
        lambda1,
        lambda2,
        model: Some(ModelJson::from_fixed(&model)),
    })
}

/// Confounded reference: ridge of stage-2 outcomes on RBF features of the
/// treatment alone, ignoring both proxies. Correct only if there were no
/// hidden confounding, which is the point of the comparison.
fn fit_direct_ridge(data: &ObservationSet, truth: &GroundTruth, cfg: &ExperimentConfig, seed: u64) -> CliResult<FitOutcome> {
    let dict = RbfDictionary::from_data(
        data.stage2_a(),
        cfg.max_centers,
        mix_seed(seed, DIRECT_RIDGE_STREAM),
    )?;
    let feats = dict.features_batch(data.stage2_a())?;
    let n = data.n();
    let u = fit_stage2_weights(&feats, data.stage2_y(), DIRECT_RIDGE_LAMBDA, n)?;
    let pred = feats.mul_vec(&u)?;
    let fit = pred
        .iter()
        .zip(data.stage2_y())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n as f64;
    let l2 = fit + DIRECT_RIDGE_LAMBDA * u.iter().map(|c| c * c).sum::<f64>();
    let oos_mse = grid_mse(
        |a| {
            let f = dict.features(a)?;
            Ok(f.iter().zip(&u).map(|(x, w)| x * w).sum::<f64>())
        },
        truth,
    )?;
    Ok(FitOutcome { oos_mse, l1: 0.0, l2, lambda1: 0.0, lambda2: DIRECT_RIDGE_LAMBDA, model: None })
}

#[derive(Clone, Copy)]
enum JobEstimator {
    Listed(EstimatorKind),
    DirectRidge,
}

impl JobEstimator {
    fn name(&self) -> &'static str {
        match self {
            JobEstimator::Listed(e) => e.name(),
            JobEstimator::DirectRidge => "direct_ridge",
        }
    }
}

struct Job {
    estimator: JobEstimator,
    size: usize,
    seed: u64,
}

/// Pull-based pool: workers claim job indices from a shared counter and
/// send results to the collector, which restores job order.
fn run_jobs<J, R, F>(jobs: &[J], f: F) -> Vec<R>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> R + Sync,
{
    let count = jobs.len();
    if count == 0 {
        return Vec::new();
    }
    let workers = thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(count);
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..count).map(|_| None).collect();
    thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, R)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            let f = &f;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= count {
                    break;
                }
                if tx.send((i, f(&jobs[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, r) in rx {
            slots[i] = Some(r);
        }
    });
    slots.into_iter().map(|s| s.expect("pool completed every job")).collect()
}

pub fn run_structural_experiment(cfg: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    cfg.validate()?;
    let shared = shared_truth(cfg.dgp)?;

    let mut jobs = Vec::new();
    for &size in &cfg.sizes {
        for sim in 0..cfg.n_sims {
            let seed = cfg.base_seed + sim as u64;
            for &estimator in &cfg.estimators {
                jobs.push(Job { estimator: JobEstimator::Listed(estimator), size, seed });
            }
            jobs.push(Job { estimator: JobEstimator::DirectRidge, size, seed });
        }
    }

    type JobOutput =
        Result<(RunResult, Option<(String, ModelJson)>, Option<(String, GroundTruth)>), RunFailure>;
    let dgp_name = cfg.dgp.name();
    let outcomes: Vec<JobOutput> = run_jobs(&jobs, |job| {
        let start = Instant::now();
        let fail = |message: String| RunFailure {
            dgp: dgp_name.to_string(),
            estimator: job.estimator.name().to_string(),
            size: job.size,
            seed: job.seed,
            message,
        };
        let (data, own_truth) =
            generate_data(cfg.dgp, job.size, job.seed).map_err(|e| fail(e.to_string()))?;
        let truth = own_truth
            .as_ref()
            .or(shared.as_ref())
            .expect("every dgp has a truth source");
        let fitted = match job.estimator {
            JobEstimator::Listed(EstimatorKind::Dfpv) => fit_dfpv(&data, truth, cfg, job.seed),
            JobEstimator::Listed(EstimatorKind::FixedFeature) => {
                fit_fixed(&data, truth, cfg, job.seed)
            }
            JobEstimator::DirectRidge => fit_direct_ridge(&data, truth, cfg, job.seed),
        }
        .map_err(|e| fail(e.to_string()))?;
        let result = RunResult {
            dgp: dgp_name.to_string(),
            estimator: job.estimator.name().to_string(),
            size: job.size,
            seed: job.seed,
            oos_mse: fitted.oos_mse,
            wall_time_s: start.elapsed().as_secs_f64(),
            l1: fitted.l1,
            l2: fitted.l2,
            lambda1: fitted.lambda1,
            lambda2: fitted.lambda2,
        };
        let truth_entry = own_truth.map(|t| (format!("{dgp_name}_seed{}", job.seed), t));
        let model = fitted.model.map(|m| {
            (format!("{dgp_name}_{}_{}_{}", job.estimator.name(), job.size, job.seed), m)
        });
        Ok((result, model, truth_entry))
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    let mut truths = BTreeMap::new();
    let mut models = Vec::new();
    if let Some(t) = shared {
        truths.insert(dgp_name.to_string(), t);
    }
    for outcome in outcomes {
        match outcome {
            Ok((result, model, truth_entry)) => {
                results.push(result);
                if let Some((stem, m)) = model {
                    models.push((stem, m));
                }
                if let Some((stem, t)) = truth_entry {
                    truths.entry(stem).or_insert(t);
                }
            }
            Err(failure) => failures.push(failure),
        }
    }
    let summary = summarize(&results);
    Ok(ExperimentOutput { results, failures, summary, truths, models })
}

pub fn run_ope_experiment(cfg: &ExperimentConfig, policy_kind: PolicyKind) -> CliResult<OpeOutput> {
    cfg.validate()?;
    if cfg.dgp != DgpKind::Demand {
        return Err(validation("policy evaluation is defined on the demand dgp only"));
    }
    let policy = policy_kind.to_policy();
    let (v_true, v_true_stderr) = ope_truth_mc(&policy, TRUTH_MC_DRAWS, TRUTH_MC_SEED)?;

    let mut jobs = Vec::new();
    for &size in &cfg.sizes {
        for sim in 0..cfg.n_sims {
            let seed = cfg.base_seed + sim as u64;
            for &estimator in &cfg.estimators {
                jobs.push((Some(estimator), size, seed));
            }
            jobs.push((None, size, seed));
        }
    }

    let dgp_name = cfg.dgp.name();
    let outcomes: Vec<Result<OpeResult, RunFailure>> = run_jobs(&jobs, |&(estimator, size, seed)| {
        let start = Instant::now();
        let label = estimator.map(|e| e.name()).unwrap_or("mean_outcome");
        let fail = |message: String| RunFailure {
            dgp: dgp_name.to_string(),
            estimator: label.to_string(),
            size,
            seed,
            message,
        };
        let run = || -> CliResult<f64> {
            let context = demand_context_for(&policy)?;
            let data = gen_demand_with_ope(size, size, size, context, seed)?;
            let v_hat = match estimator {
                None => mean(data.stage2_y()),
                Some(EstimatorKind::Dfpv) => {
                    let mut train = cfg.train.to_config();
                    train.seed = seed;
                    let (model, _) = train_dfpv(&data, &DfpvArch::uniform(&[32, 16, 8]), &train)?;
                    estimate_value(
                        &model.bridge(),
                        &policy,
                        data.ope_c().expect("generator attaches evaluation contexts"),
                        data.ope_w().expect("generator attaches evaluation proxies"),
                    )?
                }
                Some(EstimatorKind::FixedFeature) => {
                    let dicts = FixedDictionaries::from_stage1(&data, cfg.max_centers, seed)?;
                    let model =
                        fit_fixed_feature(&data, &dicts, cfg.train.lambda1, cfg.train.lambda2)?;
                    estimate_value(
                        &model.bridge(),
                        &policy,
                        data.ope_c().expect("generator attaches evaluation contexts"),
                        data.ope_w().expect("generator attaches evaluation proxies"),
                    )?
                }
            };
            Ok(v_hat)
        };
        let v_hat = run().map_err(|e| fail(e.to_string()))?;
        Ok(OpeResult {
            dgp: dgp_name.to_string(),
            policy: policy_kind.name().to_string(),
            estimator: label.to_string(),
            size,
            seed,
            v_hat,
            v_true,
            sq_err: (v_hat - v_true) * (v_hat - v_true),
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(f) => failures.push(f),
        }
    }
    Ok(OpeOutput {
        policy: policy_kind.name().to_string(),
        results,
        failures,
        v_true,
        v_true_stderr,
    })
}

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// results.csv keeps full-precision floats so a reloaded model reproduces
/// its logged MSE exactly; wall_time_s is zeroed there (real timings go to
/// timings.csv) to keep reruns byte-identical.
pub fn write_structural_outputs(output: &ExperimentOutput, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let mut results = Vec::new();
    writeln!(results, "dgp,estimator,size,seed,oos_mse,wall_time_s,l1,l2,lambda1,lambda2")?;
    for r in &output.results {
        writeln!(
            results,
            "{},{},{},{},{},0,{},{},{},{}",
            r.dgp, r.estimator, r.size, r.seed, r.oos_mse, r.l1, r.l2, r.lambda1, r.lambda2
        )?;
    }
    fs::write(dir.join("results.csv"), results)?;

    let mut timings = Vec::new();
    writeln!(timings, "dgp,estimator,size,seed,wall_time_s")?;
    for r in &output.results {
        writeln!(timings, "{},{},{},{},{}", r.dgp, r.estimator, r.size, r.seed, r.wall_time_s)?;
    }
    fs::write(dir.join("timings.csv"), timings)?;

    let mut failures = Vec::new();
    writeln!(failures, "dgp,estimator,size,seed,error")?;
    for f in &output.failures {
        writeln!(
            failures,
            "{},{},{},{},{}",
            f.dgp,
            f.estimator,
            f.size,
            f.seed,
            csv_quote(&f.message)
        )?;
    }
    fs::write(dir.join("failures.csv"), failures)?;

    let mut summary = Vec::new();
    writeln!(summary, "dgp,estimator,size,count,median_mse,q25_mse,q75_mse")?;
    for s in &output.summary {
        writeln!(
            summary,
            "{},{},{},{},{},{},{}",
            s.dgp,
            s.estimator,
            s.size,
            s.count,
            g6(s.median),
            g6(s.q25),
            g6(s.q75)
        )?;
    }
    fs::write(dir.join("summary.csv"), summary)?;

    for (stem, truth) in &output.truths {
        write_truth_csv(&dir.join(format!("truth_{stem}.csv")), truth)?;
    }

    if !output.models.is_empty() {
        let models_dir = dir.join("models");
        fs::create_dir_all(&models_dir)?;
        for (stem, model) in &output.models {
            model.save(&models_dir.join(format!("{stem}.json")))?;
        }
    }

    if !output.summary.is_empty() {
        let dgp = &output.summary[0].dgp;
        let svg = mse_plot(&output.summary, &format!("{dgp}: out-of-sample structural MSE"))?;
        fs::write(dir.join(format!("{dgp}_oos_mse.svg")), svg)?;
    }
    Ok(())
}

pub fn write_ope_outputs(output: &OpeOutput, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let mut results = Vec::new();
    writeln!(results, "dgp,policy,estimator,size,seed,v_hat,v_true,sq_err")?;
    for r in &output.results {
        writeln!(
            results,
            "{},{},{},{},{},{},{},{}",
            r.dgp, r.policy, r.estimator, r.size, r.seed, r.v_hat, r.v_true, r.sq_err
        )?;
    }
    fs::write(dir.join("ope_results.csv"), results)?;

    let mut timings = Vec::new();
    writeln!(timings, "dgp,policy,estimator,size,seed,wall_time_s")?;
    for r in &output.results {
        writeln!(
            timings,
            "{},{},{},{},{},{}",
            r.dgp, r.policy, r.estimator, r.size, r.seed, r.wall_time_s
        )?;
    }
    fs::write(dir.join("ope_timings.csv"), timings)?;

    let mut failures = Vec::new();
    writeln!(failures, "dgp,policy,estimator,size,seed,error")?;
    for f in &output.failures {
        writeln!(
            failures,
            "{},{},{},{},{},{}",
            f.dgp,
            output.policy,
            f.estimator,
            f.size,
            f.seed,
            csv_quote(&f.message)
        )?;
    }
    fs::write(dir.join("ope_failures.csv"), failures)?;
    Ok(())
}
