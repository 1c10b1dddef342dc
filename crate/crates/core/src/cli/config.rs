use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::entmax::{AlphaParam, AttentionKernel};
use crate::error::{Error, Result};
use crate::regularizers::RegularizerKind;
use crate::trainer::TrainConfig;

/// α used when `--kernel entmax` is given without `--alpha`.
pub const DEFAULT_ENTMAX_ALPHA: f64 = 1.5;

/// Everything `train` needs, as one TOML file:
///
/// ```toml
/// bundle = "data/synthetic"
/// out = "runs/softmax"
///
/// [train]
/// learning_rate = 0.001
/// latent_dim = 16
/// kernel = { kind = "entmax", alpha = { value = 1.05, learnable = true } }
/// ```
///
/// Unknown keys at any level are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub bundle: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Defaults, then `file`, then `overrides`. Every problem found along the
    /// way is reported together, before any data is read.
    pub fn resolve(file: Option<&Path>, overrides: &TrainOverrides) -> Result<Self> {
        let mut config = match file {
            Some(path) => Self::load(path)?,
            None => RunConfig::default(),
        };
        let mut problems = overrides.apply(&mut config);
        if config.bundle.is_none() {
            problems.push("no bundle directory given (--bundle or `bundle =`)".into());
        }
        if config.out.is_none() {
            problems.push("no output directory given (--out or `out =`)".into());
        }
        if let Err(Error::Config(msg)) = config.train.validate() {
            problems.push(msg);
        }
        if problems.is_empty() {
            Ok(config)
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelName {
    Softmax,
    Entmax,
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct TrainOverrides {
    pub bundle: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub kernel: Option<KernelName>,
    pub alpha: Option<f64>,
    pub learn_alpha: bool,
    pub regularizer: Option<RegularizerKind>,
    pub weight: Option<f64>,
    pub init_std: Option<f64>,
    pub embedding_dim: Option<usize>,
    pub shared_count: Option<usize>,
    pub latent_dim: Option<usize>,
    pub layers: Option<usize>,
    pub dropout: Option<f64>,
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_steps: Option<u64>,
    pub eval_every: Option<u64>,
    pub patience: Option<u64>,
}

impl TrainOverrides {
    /// Writes every given value into `config` and returns the combinations
    /// that make no sense (e.g. `--alpha` with the softmax kernel).
    pub fn apply(&self, config: &mut RunConfig) -> Vec<String> {
        let mut problems = Vec::new();
        if let Some(b) = &self.bundle {
            config.bundle = Some(b.clone());
        }
        if let Some(o) = &self.out {
            config.out = Some(o.clone());
        }
        let t = &mut config.train;
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { t.$target = v; })*
            };
        }
        set!(
            seed => seed,
            embedding_dim => embedding_dim,
            shared_count => shared_count,
            latent_dim => latent_dim,
            layers => layers,
            dropout => dropout,
            learning_rate => learning_rate,
            weight_decay => weight_decay,
            batch_size => batch_size,
            max_steps => max_steps,
            eval_every => eval_every,
            patience => patience,
        );
        if let Some(std) = self.init_std {
            t.init.std = std;
        }
        if let Some(kind) = self.regularizer {
            t.regularizer.kind = kind;
        }
        if let Some(w) = self.weight {
            t.regularizer.weight = w;
        }

        let current = t.kernel.alpha();
        t.kernel = match (self.kernel, current) {
            (Some(KernelName::Softmax), _) | (None, None) => {
                if self.alpha.is_some() || self.learn_alpha {
                    problems.push("--alpha and --learn-alpha need the entmax kernel".into());
                }
                AttentionKernel::Softmax
            }
            (Some(KernelName::Entmax), _) | (None, Some(_)) => {
                let base = current.unwrap_or(AlphaParam::fixed(DEFAULT_ENTMAX_ALPHA));
                AttentionKernel::Entmax {
                    alpha: AlphaParam {
                        value: self.alpha.unwrap_or(base.value),
                        learnable: self.learn_alpha || base.learnable,
                    },
                }
            }
        };
        problems
    }
}

/// SHA-256 of the canonical JSON form of `config`, in hex.
pub fn config_hash(config: &TrainConfig) -> String {
    let json = serde_json::to_vec(config).expect("TrainConfig always serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}
