use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sve_core::cli::{
    cmd_analyze, cmd_eval, cmd_generate, cmd_train, AnalyzeArgs, EvalArgs, GenerateArgs, KernelName, RunConfig,
    TrainOverrides,
};
use sve_core::interpretability::AnalysisOptions;
use sve_core::regularizers::RegularizerKind;
use sve_core::task_data::SyntheticConfig;

/// Multi-task learning over disjoint tabular tasks with shared variable embeddings.
#[derive(Parser)]
#[command(name = "sve", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic task bundle.
    Generate(GenerateCmd),
    /// Train on a bundle; writes best.ckpt, steps.jsonl and report.json.
    Train(TrainCmd),
    /// Score a checkpoint on the test split.
    Eval(EvalCmd),
    /// Interpretability trials, random baseline, sharing and stable rank.
    Analyze(AnalyzeCmd),
}

#[derive(Args)]
struct GenerateCmd {
    /// Output directory.
    out: PathBuf,
    #[arg(long, default_value_t = 6)]
    tasks: usize,
    #[arg(long, default_value_t = 2)]
    families: usize,
    #[arg(long)]
    concepts: Option<usize>,
    #[arg(long)]
    train_per_task: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replace a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Softmax,
    Entmax,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegularizerArg {
    None,
    Orthogonality,
    StableRank,
    VonNeumann,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct TrainCmd {
    /// TOML run configuration; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    learn_alpha: bool,
    #[arg(long, value_enum)]
    regularizer: Option<RegularizerArg>,
    /// Regularizer weight.
    #[arg(long)]
    weight: Option<f64>,
    #[arg(long)]
    init_std: Option<f64>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    shared_count: Option<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    eval_every: Option<u64>,
    #[arg(long)]
    patience: Option<u64>,
}

impl TrainCmd {
    fn overrides(&self) -> TrainOverrides {
        TrainOverrides {
            bundle: self.bundle.clone(),
            out: self.out.clone(),
            seed: self.seed,
            kernel: self.kernel.map(|k| match k {
                KernelArg::Softmax => KernelName::Softmax,
                KernelArg::Entmax => KernelName::Entmax,
            }),
            alpha: self.alpha,
            learn_alpha: self.learn_alpha,
            regularizer: self.regularizer.map(|r| match r {
                RegularizerArg::None => RegularizerKind::None,
                RegularizerArg::Orthogonality => RegularizerKind::Orthogonality,
                RegularizerArg::StableRank => RegularizerKind::StableRank,
                RegularizerArg::VonNeumann => RegularizerKind::VonNeumann,
            }),
            weight: self.weight,
            init_std: self.init_std,
            embedding_dim: self.embedding_dim,
            shared_count: self.shared_count,
            latent_dim: self.latent_dim,
            layers: self.layers,
            dropout: self.dropout,
            learning_rate: self.lr,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            max_steps: self.max_steps,
            eval_every: self.eval_every,
            patience: self.patience,
        }
    }
}

#[derive(Args)]
struct EvalCmd {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
    /// Directory for eval.json and eval.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeCmd {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
    /// Directory for analysis.json and analysis.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    sharing_threshold: f64,
    #[arg(long, default_value_t = 1000)]
    baseline_trials: usize,
    #[arg(long, default_value_t = 5)]
    top_n: usize,
    #[arg(long)]
    seed: Option<u64>,
}

fn run(command: Command) -> sve_core::Result<serde_json::Value> {
    Ok(match command {
        Command::Generate(g) => {
            let defaults = SyntheticConfig::default();
            let synthetic = SyntheticConfig {
                n_tasks: g.tasks,
                concept_families: g.families,
                concepts_per_family: g.concepts.unwrap_or(defaults.concepts_per_family),
                train_per_task: g.train_per_task.unwrap_or(defaults.train_per_task),
                ..defaults
            };
            let bundle = cmd_generate(&GenerateArgs {
                synthetic,
                seed: g.seed,
                out: g.out.clone(),
                force: g.force,
            })?;
            json!({ "bundle": g.out, "tasks": bundle.len(), "inputs": bundle.n_inputs() })
        }
        Command::Train(t) => {
            let config = RunConfig::resolve(t.config.as_deref(), &t.overrides())?;
            let report = cmd_train(&config)?;
            json!({
                "out": config.out,
                "best_step": report.best_step,
                "final_step": report.final_step,
                "validation_accuracy": report.validation.mean_accuracy_unweighted,
                "test_accuracy": report.test.mean_accuracy_unweighted,
            })
        }
        Command::Eval(e) => {
            let report = cmd_eval(&EvalArgs {
                checkpoint: e.checkpoint,
                bundle: e.bundle,
                out: e.out,
            })?;
            serde_json::to_value(report)?
        }
        Command::Analyze(a) => {
            let options = AnalysisOptions {
                trials: a.trials,
                k: a.k,
                baseline_trials: a.baseline_trials,
                sharing_threshold: a.sharing_threshold,
                top_n: a.top_n,
            };
            let report = cmd_analyze(&AnalyzeArgs {
                checkpoint: a.checkpoint,
                bundle: a.bundle,
                out: a.out,
                options,
                seed: a.seed,
            })?;
            json!({
                "mean_purity": report.trial_summary.mean_purity,
                "baseline_mean_purity": report.baseline_summary.mean_purity,
                "stable_rank": report.stable_rank,
            })
        }
    })
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string()),
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), e.to_string()),
    }
}
