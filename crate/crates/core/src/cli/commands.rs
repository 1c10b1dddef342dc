use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::{config_hash, RunConfig};
use crate::error::{Error, Result};
use crate::interpretability::{analyze, AnalysisOptions, AnalysisReport};
use crate::numerics::Rng;
use crate::task_data::{generate_synthetic, load_bundle, save_bundle, LoadOptions, Split, SyntheticConfig, TaskBundle};
use crate::trainer::{evaluate, fit, EvalReport, TrainConfig};

pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const STEP_LOG: &str = "steps.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const RESOLVED_CONFIG: &str = "config.toml";
pub const EVAL_JSON: &str = "eval.json";
pub const EVAL_CSV: &str = "eval.csv";
pub const ANALYSIS_JSON: &str = "analysis.json";
pub const ANALYSIS_TEXT: &str = "analysis.txt";

#[derive(Clone, Debug)]
pub struct GenerateArgs {
    pub synthetic: SyntheticConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub force: bool,
}

/// Writes a synthetic bundle. A non-empty `out` is replaced only with `force`.
pub fn cmd_generate(args: &GenerateArgs) -> Result<TaskBundle> {
    let out = &args.out;
    if out.exists() {
        let mut entries = fs::read_dir(out).map_err(|e| Error::io(out, e))?;
        if entries.next().is_some() {
            if !args.force {
                return Err(Error::OutputExists(out.clone()));
            }
            fs::remove_dir_all(out).map_err(|e| Error::io(out, e))?;
        }
    }
    let bundle = generate_synthetic(&args.synthetic, &mut Rng::new(args.seed))?;
    save_bundle(&bundle, out)?;
    Ok(bundle)
}

/// Contents of `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config_hash: String,
    pub config: TrainConfig,
    pub best_step: u64,
    pub final_step: u64,
    pub stopped_early: bool,
    pub best_alpha: Option<f64>,
    pub validation: EvalReport,
    pub test: EvalReport,
    /// `(step, mean unweighted validation accuracy)` per evaluation.
    pub history: Vec<(u64, f64)>,
}

fn bundle_for(dir: &Path, config: &TrainConfig) -> Result<TaskBundle> {
    load_bundle(
        dir,
        &LoadOptions {
            seed: config.seed,
            ..LoadOptions::default()
        },
    )
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Trains per `config` and writes the best checkpoint, the step log, the
/// report and the resolved config into the output directory.
pub fn cmd_train(config: &RunConfig) -> Result<TrainReport> {
    config.train.validate()?;
    let (Some(bundle_dir), Some(out)) = (&config.bundle, &config.out) else {
        return Err(Error::Config("train needs both a bundle and an output directory".into()));
    };
    let bundle = bundle_for(bundle_dir, &config.train)?;
    let outcome = fit(&bundle, &config.train)?;

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    Checkpoint::new(&bundle, &config.train, outcome.best_step, &outcome.best_rng, &outcome.best)
        .save(&out.join(BEST_CHECKPOINT))?;

    let mut log = String::new();
    for record in &outcome.log {
        log.push_str(&serde_json::to_string(record)?);
        log.push('\n');
    }
    write(&out.join(STEP_LOG), log)?;

    let report = TrainReport {
        config_hash: config_hash(&config.train),
        config: config.train.clone(),
        best_step: outcome.best_step,
        final_step: outcome.state.step,
        stopped_early: outcome.state.step < config.train.max_steps,
        best_alpha: outcome.best.alpha(),
        validation: outcome.validation,
        test: outcome.test,
        history: outcome.history,
    };
    write(&out.join(REPORT_JSON), serde_json::to_string_pretty(&report)?)?;
    write(&out.join(RESOLVED_CONFIG), config.to_toml()?)?;
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub bundle: PathBuf,
    pub out: Option<PathBuf>,
}

/// Test-split accuracy of a saved model; optionally writes JSON and a
/// per-task CSV.
pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let bundle = bundle_for(&args.bundle, &ckpt.config)?;
    if bundle.is_empty() {
        return Err(Error::Domain(format!("bundle {} has no tasks", args.bundle.display())));
    }
    ckpt.check_compatible(&bundle)?;
    let report = evaluate(&bundle, &ckpt.model, Split::Test, ckpt.step)?;
    if let Some(out) = &args.out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write(&out.join(EVAL_JSON), serde_json::to_string_pretty(&report)?)?;
        write_eval_csv(&out.join(EVAL_CSV), &bundle, &report)?;
    }
    Ok(report)
}

/// One row per task: id, name, subject area, test examples, accuracy.
pub fn write_eval_csv(path: &Path, bundle: &TaskBundle, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Domain(format!("{}: {e}", path.display())))?;
    let fail = |e: csv::Error| Error::Domain(format!("{}: {e}", path.display()));
    w.write_record(["task_id", "name", "subject_area", "examples", "accuracy"])
        .map_err(fail)?;
    for task in bundle.tasks() {
        let id = task.spec.task_id;
        w.write_record([
            id.to_string(),
            task.spec.name.clone(),
            task.spec.subject_area.to_string(),
            report.per_task_examples[&id].to_string(),
            report.per_task_accuracy[&id].to_string(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug)]
pub struct AnalyzeArgs {
    pub checkpoint: PathBuf,
    pub bundle: PathBuf,
    pub out: Option<PathBuf>,
    pub options: AnalysisOptions,
    /// Defaults to the seed stored in the checkpoint.
    pub seed: Option<u64>,
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<AnalysisReport> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let d = ckpt.config.shared_count;
    let o = &args.options;
    let mut problems = Vec::new();
    if o.trials == 0 || o.trials > d {
        problems.push(format!("--trials must lie in 1..={d} (the shared embedding count), got {}", o.trials));
    }
    if o.k == 0 {
        problems.push("--k must be at least 1".to_string());
    }
    if !(0.0..=1.0).contains(&o.sharing_threshold) {
        problems.push(format!("--sharing-threshold must lie in [0, 1], got {}", o.sharing_threshold));
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }
    let bundle = bundle_for(&args.bundle, &ckpt.config)?;
    ckpt.check_compatible(&bundle)?;
    let mut rng = Rng::new(args.seed.unwrap_or(ckpt.config.seed));
    let report = analyze(&ckpt.model.store, &ckpt.model.kernel, &bundle, o, &mut rng)?;
    if let Some(out) = &args.out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write(&out.join(ANALYSIS_JSON), serde_json::to_string_pretty(&report)?)?;
        let mut text = report.to_text();
        let _ = writeln!(text, "checkpoint step {}, seed {}", ckpt.step, args.seed.unwrap_or(ckpt.config.seed));
        write(&out.join(ANALYSIS_TEXT), text)?;
    }
    Ok(report)
}
