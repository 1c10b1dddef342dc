//! Binary layout:
//!
//! ```text
//! b"SVECKPT\0"  u64 LE header length  header JSON  f64 LE tensors...
//! ```
//!
//! The tensors follow in the order listed by the header, each row-major.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::config_hash;
use crate::entmax::AttentionKernel;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng, RngState};
use crate::predictor::PredictorParams;
use crate::shared_embeddings::EmbeddingStore;
use crate::task_data::TaskBundle;
use crate::trainer::{Model, TrainConfig};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"SVECKPT\0";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskShape {
    pub name: String,
    pub n_inputs: usize,
    pub n_classes: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorShape {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorShape {
    fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub version: u32,
    pub config_hash: String,
    pub config: TrainConfig,
    pub step: u64,
    pub rng: RngState,
    pub tasks: Vec<TaskShape>,
    pub tensors: Vec<TensorShape>,
}

/// A trained model plus what is needed to reproduce or resume it.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub step: u64,
    pub rng: Rng,
    pub tasks: Vec<TaskShape>,
    pub model: Model,
}

impl Checkpoint {
    pub fn new(bundle: &TaskBundle, config: &TrainConfig, step: u64, rng: &Rng, model: &Model) -> Self {
        let tasks = bundle
            .tasks()
            .iter()
            .map(|t| TaskShape {
                name: t.spec.name.clone(),
                n_inputs: t.spec.n_inputs,
                n_classes: t.spec.n_classes,
            })
            .collect();
        Checkpoint {
            config: config.clone(),
            step,
            rng: rng.clone(),
            tasks,
            model: model.clone(),
        }
    }

    pub fn header(&self) -> CheckpointHeader {
        CheckpointHeader {
            version: CHECKPOINT_VERSION,
            config_hash: config_hash(&self.config),
            config: self.config.clone(),
            step: self.step,
            rng: self.rng.state(),
            tasks: self.tasks.clone(),
            tensors: tensor_table(&self.model).into_iter().map(|(shape, _)| shape).collect(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header())?;
        let table = tensor_table(&self.model);
        let floats: usize = table.iter().map(|(s, _)| s.len()).sum();
        let mut out = Vec::with_capacity(16 + header.len() + 8 * floats);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, data) in table {
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::Checkpoint(msg);
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing checkpoint signature".into()));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body_start = 16usize
            .checked_add(header_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| bad("header length runs past end of file".into()))?;
        let header: CheckpointHeader = serde_json::from_slice(&bytes[16..body_start])?;
        if header.version != CHECKPOINT_VERSION {
            return Err(bad(format!(
                "version {} is not supported (expected {CHECKPOINT_VERSION})",
                header.version
            )));
        }
        if config_hash(&header.config) != header.config_hash {
            return Err(bad("config hash does not match the stored config".into()));
        }
        let rng = Rng::from_state(&header.rng)
            .ok_or_else(|| bad(format!("unknown RNG algorithm `{}`", header.rng.algorithm)))?;

        let mut model = skeleton(&header.config, &header.tasks)?;
        let expected: Vec<TensorShape> = tensor_table(&model).into_iter().map(|(s, _)| s).collect();
        if expected != header.tensors {
            return Err(bad("tensor table does not match the stored config".into()));
        }
        let floats: usize = expected.iter().map(TensorShape::len).sum();
        let body = &bytes[body_start..];
        if body.len() != 8 * floats {
            return Err(bad(format!("expected {} payload bytes, found {}", 8 * floats, body.len())));
        }
        let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        for dst in tensors_mut(&mut model) {
            dst.iter_mut().for_each(|v| *v = values.next().unwrap());
        }
        Ok(Checkpoint {
            config: header.config,
            step: header.step,
            rng,
            tasks: header.tasks,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    /// Fails with the first task whose variable counts differ from `bundle`.
    pub fn check_compatible(&self, bundle: &TaskBundle) -> Result<()> {
        if self.tasks.len() != bundle.len() {
            return Err(Error::Incompatible(format!(
                "checkpoint has {} tasks, bundle has {}",
                self.tasks.len(),
                bundle.len()
            )));
        }
        for (i, (saved, task)) in self.tasks.iter().zip(bundle.tasks()).enumerate() {
            let spec = &task.spec;
            if saved.n_inputs != spec.n_inputs || saved.n_classes != spec.n_classes {
                return Err(Error::Incompatible(format!(
                    "task {i} `{}`: checkpoint expects {} inputs and {} classes, bundle task `{}` has {} and {}",
                    saved.name, saved.n_inputs, saved.n_classes, spec.name, spec.n_inputs, spec.n_classes
                )));
            }
        }
        Ok(())
    }
}

/// Zero-valued model with the shapes implied by `config` and `tasks`.
fn skeleton(config: &TrainConfig, tasks: &[TaskShape]) -> Result<Model> {
    let n: usize = tasks.iter().map(|t| t.n_inputs).sum();
    let m: usize = tasks.iter().map(|t| t.n_classes).sum();
    let (c, d) = (config.embedding_dim, config.shared_count);
    let params = PredictorParams::init(&config.predictor(), c, &mut Rng::new(0))?.zeros_like();
    Ok(Model {
        store: EmbeddingStore {
            z: Matrix::zeros(n, c),
            s: Matrix::zeros(d, c),
            z_out: Matrix::zeros(m, c),
        },
        params,
        kernel: config.kernel,
    })
}

fn tensor_table(model: &Model) -> Vec<(TensorShape, Vec<f64>)> {
    let matrix = |name: &str, m: &Matrix| {
        (
            TensorShape {
                name: name.into(),
                shape: vec![m.rows(), m.cols()],
            },
            m.as_slice().to_vec(),
        )
    };
    let mut out = vec![
        matrix("z", &model.store.z),
        matrix("s", &model.store.s),
        matrix("z_out", &model.store.z_out),
    ];
    if let Some(alpha) = model.kernel.alpha() {
        out.push((
            TensorShape {
                name: "alpha".into(),
                shape: vec![1],
            },
            vec![alpha.value],
        ));
    }
    let names = model.params.tensor_names();
    for (name, (data, _)) in names.into_iter().zip(model.params.tensors()) {
        out.push((
            TensorShape {
                name,
                shape: vec![data.len()],
            },
            data.to_vec(),
        ));
    }
    out
}

fn tensors_mut(model: &mut Model) -> Vec<&mut [f64]> {
    let mut out: Vec<&mut [f64]> = vec![
        model.store.z.as_mut_slice(),
        model.store.s.as_mut_slice(),
        model.store.z_out.as_mut_slice(),
    ];
    if let AttentionKernel::Entmax { alpha } = &mut model.kernel {
        out.push(std::slice::from_mut(&mut alpha.value));
    }
    out.extend(model.params.tensors_mut().into_iter().map(|(t, _)| t));
    out
}
