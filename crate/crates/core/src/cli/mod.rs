//! Artifact plumbing behind the `sve` binary: run configuration files,
//! checkpoints, and the `generate` / `train` / `eval` / `analyze` commands.
//! Argument parsing itself lives in the binary crate.

mod checkpoint;
mod commands;
mod config;

pub use checkpoint::{Checkpoint, CheckpointHeader, TaskShape, TensorShape, CHECKPOINT_VERSION};
pub use commands::{
    cmd_analyze, cmd_eval, cmd_generate, cmd_train, write_eval_csv, AnalyzeArgs, EvalArgs, GenerateArgs, TrainReport,
    ANALYSIS_JSON, ANALYSIS_TEXT, BEST_CHECKPOINT, EVAL_CSV, EVAL_JSON, REPORT_JSON, RESOLVED_CONFIG, STEP_LOG,
};
pub use config::{config_hash, KernelName, RunConfig, TrainOverrides, DEFAULT_ENTMAX_ALPHA};
