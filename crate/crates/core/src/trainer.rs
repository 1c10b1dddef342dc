//! End-to-end optimization: squared hinge loss plus the configured
//! regularizer, plain SGD with weight decay, per-step task sampling, early
//! stopping on validation accuracy, and accuracy evaluation.

use std::collections::{BTreeMap, VecDeque};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::entmax::{AlphaParam, AttentionKernel};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};
use crate::predictor::{
    argmax, batch_gradients, forward_example, predict, Conditioning, ParamKind, PredictorConfig, PredictorParams,
};
use crate::regularizers::Regularizer;
use crate::shared_embeddings::{attend, attend_backward, init_store, EmbeddingStore, InitScheme};
use crate::task_data::{encode_target, Split, TargetEncoding, TaskBundle};

/// Losses kept in [`TrainState::loss_history`].
pub const LOSS_HISTORY: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_steps: u64,
    pub eval_every: u64,
    /// Evaluations without improvement before stopping.
    pub patience: u64,
    pub seed: u64,
    pub init: InitScheme,
    pub kernel: AttentionKernel,
    pub regularizer: Regularizer,
    pub dropout: f64,
    /// `C`.
    pub embedding_dim: usize,
    /// `D`.
    pub shared_count: usize,
    /// `H`.
    pub latent_dim: usize,
    pub layers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            batch_size: 32,
            max_steps: 100_000,
            eval_every: 100,
            patience: 20,
            seed: 0,
            init: InitScheme::default(),
            kernel: AttentionKernel::Softmax,
            regularizer: Regularizer::none(),
            dropout: 0.0,
            embedding_dim: 128,
            shared_count: 128,
            latent_dim: 128,
            layers: 10,
        }
    }
}

impl TrainConfig {
    /// Small profile that trains the synthetic bundles in seconds on one core.
    pub fn desk() -> Self {
        TrainConfig {
            max_steps: 5_000,
            eval_every: 50,
            patience: 20,
            embedding_dim: 16,
            shared_count: 16,
            latent_dim: 16,
            layers: 3,
            ..TrainConfig::default()
        }
    }

    pub fn predictor(&self) -> PredictorConfig {
        PredictorConfig {
            latent: self.latent_dim,
            layers: self.layers,
            dropout: self.dropout,
        }
    }

    /// Collects every violated constraint into one error.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            problems.push(format!("weight_decay must be ≥ 0, got {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be at least 1".into());
        }
        if self.eval_every == 0 {
            problems.push("eval_every must be at least 1".into());
        }
        if self.patience == 0 {
            problems.push("patience must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            problems.push(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.embedding_dim == 0 || self.shared_count == 0 || self.latent_dim == 0 || self.layers == 0 {
            problems.push("embedding_dim, shared_count, latent_dim and layers must be at least 1".into());
        }
        if !(self.init.std > 0.0 && self.init.std.is_finite()) {
            problems.push(format!("init std must be > 0, got {}", self.init.std));
        }
        if self.init.kind == crate::shared_embeddings::InitKind::OrthogonalDetPlusOne
            && self.embedding_dim != self.shared_count
        {
            problems.push("orthogonal init needs embedding_dim == shared_count".into());
        }
        if let Some(alpha) = self.kernel.alpha() {
            if !(crate::entmax::ALPHA_MIN..=crate::entmax::ALPHA_MAX).contains(&alpha.value) {
                problems.push(format!(
                    "alpha must lie in [{}, {}], got {}",
                    crate::entmax::ALPHA_MIN,
                    crate::entmax::ALPHA_MAX,
                    alpha.value
                ));
            }
        }
        if let Err(e) = self.regularizer.validate((self.shared_count, self.embedding_dim)) {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Every learnable quantity: embeddings, predictor and attention kernel (α).
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub store: EmbeddingStore,
    pub params: PredictorParams,
    pub kernel: AttentionKernel,
}

impl Model {
    /// Draws `Z`, `Z_out`, `S`, then the predictor, from a stream of `seed`.
    pub fn init(bundle: &TaskBundle, config: &TrainConfig) -> Result<Self> {
        let mut rng = Rng::new(config.seed).fork(0);
        let store = init_store(bundle, config.embedding_dim, config.shared_count, config.init, &mut rng)?;
        let params = PredictorParams::init(&config.predictor(), config.embedding_dim, &mut rng)?;
        Ok(Model {
            store,
            params,
            kernel: config.kernel,
        })
    }

    /// Eval-mode scores for one example of `task`.
    pub fn predict(&self, bundle: &TaskBundle, task: usize, x: &[f64]) -> Result<Vec<f64>> {
        let rows: Vec<usize> = bundle.input_rows(task).collect();
        let processed = attend(&self.store, &rows, &self.kernel)?;
        let targets = self.store.z_out.select_rows(&bundle.target_rows(task).collect::<Vec<_>>());
        predict(&self.params, &processed.f, &targets, x)
    }

    pub fn alpha(&self) -> Option<f64> {
        self.kernel.alpha().map(|a| a.value)
    }
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub step: u64,
    pub best_validation_accuracy: f64,
    pub best_step: u64,
    /// Evaluations since the last improvement.
    pub steps_since_improvement: u64,
    pub rng: Rng,
    pub loss_history: VecDeque<f64>,
}

impl TrainState {
    pub fn new(seed: u64) -> Self {
        TrainState {
            step: 0,
            best_validation_accuracy: f64::NEG_INFINITY,
            best_step: 0,
            steps_since_improvement: 0,
            rng: Rng::new(seed).fork(1),
            loss_history: VecDeque::with_capacity(LOSS_HISTORY),
        }
    }
}

/// One line of the step log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub task_id: usize,
    /// Mean data loss plus the regularizer term.
    pub loss: f64,
    pub reg_value: f64,
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_task_accuracy: BTreeMap<usize, f64>,
    pub per_task_examples: BTreeMap<usize, usize>,
    pub mean_accuracy_unweighted: f64,
    pub mean_accuracy_example_weighted: f64,
    pub step: u64,
}

/// `Σ_j max(0, 1 − t_j ŷ_j)²` and its gradient in the scores.
pub fn hinge_loss(scores: &[f64], encoding: &TargetEncoding) -> Result<(f64, Vec<f64>)> {
    let t = encoding.as_slice();
    if t.len() != scores.len() {
        return Err(Error::Contract(format!(
            "hinge loss: {} scores for {} classes",
            scores.len(),
            t.len()
        )));
    }
    let mut value = 0.0;
    let grad = scores
        .iter()
        .zip(t)
        .map(|(&y, &tj)| {
            let gap = (1.0 - tj * y).max(0.0);
            value += gap * gap;
            -2.0 * tj * gap
        })
        .collect();
    Ok((value, grad))
}

/// `p ← p(1 − lr·wd) − lr·g`.
fn sgd(param: &mut [f64], grad: &[f64], lr: f64, wd: f64) {
    let keep = 1.0 - lr * wd;
    for (p, g) in param.iter_mut().zip(grad) {
        *p = *p * keep - lr * g;
    }
}

/// One sampled task, one batch, one SGD update.
pub fn train_step(
    state: &mut TrainState,
    bundle: &TaskBundle,
    model: &mut Model,
    config: &TrainConfig,
) -> Result<StepRecord> {
    let (task_id, batch) = bundle.sample_step(&mut state.rng, config.batch_size)?;
    let seeds: Option<Vec<u64>> =
        (model.params.dropout > 0.0).then(|| batch.iter().map(|_| state.rng.next_u64()).collect());
    let step = state.step + 1;

    let in_rows: Vec<usize> = bundle.input_rows(task_id).collect();
    let out_rows: Vec<usize> = bundle.target_rows(task_id).collect();
    let processed = attend(&model.store, &in_rows, &model.kernel)?;
    let targets = model.store.z_out.select_rows(&out_rows);
    let m = out_rows.len();
    let encodings = batch
        .iter()
        .map(|s| encode_target(s.label, m))
        .collect::<Result<Vec<_>>>()?;
    let inputs: Vec<&[f64]> = batch.iter().map(|s| s.values.as_slice()).collect();

    let (losses, mut grads) = batch_gradients(
        &model.params,
        &processed.f,
        &targets,
        &inputs,
        seeds.as_deref(),
        |e, scores| hinge_loss(scores, &encodings[e]),
    )?;
    let inv = 1.0 / batch.len() as f64;
    let data_loss = losses.iter().sum::<f64>() * inv;
    grads.params.scale(inv);
    let grad_processed = grads.processed.scale(inv);
    let grad_targets = grads.targets.scale(inv);

    let attention = attend_backward(&model.store, &in_rows, &model.kernel, &processed, &grad_processed)?;
    let mut grad_s = attention.s;
    let mut reg_value = 0.0;
    if let Some(term) = config.regularizer.apply(&model.store.s)? {
        reg_value = term.loss;
        grad_s.add_scaled(&term.grad, 1.0);
    }
    let loss = data_loss + reg_value;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            step,
            task: task_id,
            data_loss,
            regularizer: reg_value,
        });
    }

    let (lr, wd) = (config.learning_rate, config.weight_decay);
    for ((p, kind), (g, _)) in model.params.tensors_mut().into_iter().zip(grads.params.tensors()) {
        sgd(p, g, lr, if kind == ParamKind::Weight { wd } else { 0.0 });
    }
    let mut grad_z = Matrix::zeros(model.store.z.rows(), model.store.z.cols());
    for (r, &row) in in_rows.iter().enumerate() {
        grad_z.row_mut(row).copy_from_slice(attention.z_rows.row(r));
    }
    sgd(model.store.z.as_mut_slice(), grad_z.as_slice(), lr, wd);
    let mut grad_z_out = Matrix::zeros(model.store.z_out.rows(), model.store.z_out.cols());
    for (r, &row) in out_rows.iter().enumerate() {
        grad_z_out.row_mut(row).copy_from_slice(grad_targets.row(r));
    }
    sgd(model.store.z_out.as_mut_slice(), grad_z_out.as_slice(), lr, wd);
    sgd(model.store.s.as_mut_slice(), grad_s.as_slice(), lr, wd);
    if let AttentionKernel::Entmax { alpha } = &mut model.kernel {
        if alpha.learnable {
            *alpha = AlphaParam {
                value: alpha.value - lr * attention.alpha,
                learnable: true,
            };
            alpha.clamp();
        }
    }

    state.step = step;
    if state.loss_history.len() == LOSS_HISTORY {
        state.loss_history.pop_front();
    }
    state.loss_history.push_back(loss);
    Ok(StepRecord {
        step,
        task_id,
        loss,
        reg_value,
        alpha: model.alpha(),
    })
}

/// Accuracy of each task on `split`, dropout off. Tasks run in parallel.
pub fn evaluate(bundle: &TaskBundle, model: &Model, split: Split, step: u64) -> Result<EvalReport> {
    if bundle.is_empty() {
        return Err(Error::Domain("cannot evaluate an empty bundle".into()));
    }
    let results = crate::par::map_range(bundle.len(), |t| -> Result<(usize, usize)> {
        let task = bundle.task(t);
        let samples = task.split(split);
        if samples.is_empty() {
            return Err(Error::Domain(format!("task {} has an empty {split:?} split", task.spec.name)));
        }
        let rows: Vec<usize> = bundle.input_rows(t).collect();
        let processed = attend(&model.store, &rows, &model.kernel)?;
        let targets = model.store.z_out.select_rows(&bundle.target_rows(t).collect::<Vec<_>>());
        let cond = Conditioning::new(&model.params, &processed.f, &targets)?;
        let mut correct = 0;
        for s in samples {
            let trace = forward_example(&model.params, &cond, &s.values, None)?;
            if argmax(&trace.scores) == s.label {
                correct += 1;
            }
        }
        Ok((correct, samples.len()))
    });
    let mut per_task_accuracy = BTreeMap::new();
    let mut per_task_examples = BTreeMap::new();
    let (mut correct_total, mut n_total, mut acc_sum) = (0usize, 0usize, 0.0);
    for (t, r) in results.into_iter().enumerate() {
        let (correct, n) = r?;
        let acc = correct as f64 / n as f64;
        per_task_accuracy.insert(t, acc);
        per_task_examples.insert(t, n);
        correct_total += correct;
        n_total += n;
        acc_sum += acc;
    }
    Ok(EvalReport {
        per_task_accuracy,
        per_task_examples,
        mean_accuracy_unweighted: acc_sum / bundle.len() as f64,
        mean_accuracy_example_weighted: correct_total as f64 / n_total as f64,
        step,
    })
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    /// Model at the best validation evaluation.
    pub best: Model,
    pub best_step: u64,
    pub validation: EvalReport,
    pub test: EvalReport,
    pub state: TrainState,
    /// Sampling stream as it stood right after the best evaluation.
    pub best_rng: Rng,
    /// `(step, mean unweighted validation accuracy)` for every evaluation.
    pub history: Vec<(u64, f64)>,
    pub log: Vec<StepRecord>,
}

impl FitOutcome {
    /// First evaluated step whose validation accuracy reached `target`.
    pub fn steps_to_reach(&self, target: f64) -> Option<u64> {
        self.history.iter().find(|(_, acc)| *acc >= target).map(|(s, _)| *s)
    }
}

/// Trains from a fresh initialization.
pub fn fit(bundle: &TaskBundle, config: &TrainConfig) -> Result<FitOutcome> {
    config.validate()?;
    let model = Model::init(bundle, config)?;
    fit_from(bundle, config, model)
}

/// Trains `model` until `max_steps` or until `patience` evaluations pass
/// without a strict improvement in mean validation accuracy.
pub fn fit_from(bundle: &TaskBundle, config: &TrainConfig, mut model: Model) -> Result<FitOutcome> {
    config.validate()?;
    let mut state = TrainState::new(config.seed);
    let mut log = Vec::new();
    let first = evaluate(bundle, &model, Split::Validation, 0)?;
    state.best_validation_accuracy = first.mean_accuracy_unweighted;
    let mut history = vec![(0, first.mean_accuracy_unweighted)];
    let mut best = model.clone();
    let mut best_report = first;
    let mut best_rng = state.rng.clone();

    while state.step < config.max_steps {
        log.push(train_step(&mut state, bundle, &mut model, config)?);
        if state.step % config.eval_every != 0 && state.step != config.max_steps {
            continue;
        }
        let report = evaluate(bundle, &model, Split::Validation, state.step)?;
        let acc = report.mean_accuracy_unweighted;
        history.push((state.step, acc));
        if acc > state.best_validation_accuracy {
            state.best_validation_accuracy = acc;
            state.best_step = state.step;
            state.steps_since_improvement = 0;
            best = model.clone();
            best_report = report;
            best_rng = state.rng.clone();
        } else {
            state.steps_since_improvement += 1;
            if state.steps_since_improvement >= config.patience {
                break;
            }
        }
    }
    let test = evaluate(bundle, &best, Split::Test, state.best_step)?;
    Ok(FitOutcome {
        best,
        best_step: state.best_step,
        validation: best_report,
        test,
        state,
        best_rng,
        history,
        log,
    })
}
