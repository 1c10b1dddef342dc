//! Encoder/decoder predictor:
//! `score_j = g2(g1(Σ_i f(x_i, f_i)), z_j)`.
//!
//! `f` and `g2` are stacks of FiLM-conditioned layers
//! `ReLU((1 + Γe) ⊙ (W h + b) + Βe)` followed by dropout, where `e` is the
//! conditioning embedding (processed embedding for `f`, target embedding for
//! `g2`). `g1` is a plain affine/ReLU/dropout stack, and `g2` ends in an
//! affine scalar head without activation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix, Rng};

/// FiLM maps start at `N(0, (FILM_INIT_SCALE²)/C)`, so modulation begins
/// close to the identity and deep stacks do not amplify scores at init.
pub const FILM_INIT_SCALE: f64 = 0.1;

/// Shrinks the He-initialized score head so that initial scores stay near
/// zero even though the latent sums one encoder output per input.
pub const HEAD_INIT_SCALE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    /// Latent width `H`.
    pub latent: usize,
    /// Layers in each of `f`, `g1` and `g2`.
    pub layers: usize,
    pub dropout: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            latent: 128,
            layers: 10,
            dropout: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `out × in`.
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Dense {
    fn zeros(out: usize, input: usize) -> Self {
        Dense {
            w: Matrix::zeros(out, input),
            b: vec![0.0; out],
        }
    }

    fn he(out: usize, input: usize, rng: &mut Rng) -> Self {
        let std = (2.0 / input.max(out) as f64).sqrt();
        Dense {
            w: Matrix::from_fn(out, input, |_, _| std * rng.normal()),
            b: vec![0.0; out],
        }
    }

    fn apply(&self, input: &[f64]) -> Vec<f64> {
        (0..self.w.rows())
            .map(|o| dot(self.w.row(o), input) + self.b[o])
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilmLayer {
    pub linear: Dense,
    /// `out × C`; scale is `1 + gamma · e`.
    pub gamma: Matrix,
    /// `out × C`; shift is `beta · e`.
    pub beta: Matrix,
}

impl FilmLayer {
    fn zeros(out: usize, input: usize, cond: usize) -> Self {
        FilmLayer {
            linear: Dense::zeros(out, input),
            gamma: Matrix::zeros(out, cond),
            beta: Matrix::zeros(out, cond),
        }
    }

    fn init(out: usize, input: usize, cond: usize, rng: &mut Rng) -> Self {
        let linear = Dense::he(out, input, rng);
        let std = FILM_INIT_SCALE / (cond as f64).sqrt();
        let gamma = Matrix::from_fn(out, cond, |_, _| std * rng.normal());
        let beta = Matrix::from_fn(out, cond, |_, _| std * rng.normal());
        FilmLayer { linear, gamma, beta }
    }

    /// Modulation `(γ, β)` produced by conditioning vector `e`.
    pub fn modulation(&self, e: &[f64]) -> Film {
        Film {
            gamma: self.gamma.mul_vec(e).into_iter().map(|g| 1.0 + g).collect(),
            beta: self.beta.mul_vec(e),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Film {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorParams {
    pub encoder: Vec<FilmLayer>,
    pub g1: Vec<Dense>,
    pub g2: Vec<FilmLayer>,
    pub head: Dense,
    pub latent: usize,
    pub cond_dim: usize,
    pub dropout: f64,
}

impl PredictorParams {
    pub fn init(config: &PredictorConfig, cond_dim: usize, rng: &mut Rng) -> Result<Self> {
        validate_config(config)?;
        let h = config.latent;
        let encoder = (0..config.layers)
            .map(|l| FilmLayer::init(h, if l == 0 { 1 } else { h }, cond_dim, rng))
            .collect();
        let g1 = (0..config.layers).map(|_| Dense::he(h, h, rng)).collect();
        let g2 = (0..config.layers).map(|_| FilmLayer::init(h, h, cond_dim, rng)).collect();
        let mut head = Dense::he(1, h, rng);
        head.w.as_mut_slice().iter_mut().for_each(|w| *w *= HEAD_INIT_SCALE);
        Ok(PredictorParams {
            encoder,
            g1,
            g2,
            head,
            latent: h,
            cond_dim,
            dropout: config.dropout,
        })
    }

    /// Same shapes, all zeros. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let h = self.latent;
        let c = self.cond_dim;
        PredictorParams {
            encoder: (0..self.encoder.len())
                .map(|l| FilmLayer::zeros(h, if l == 0 { 1 } else { h }, c))
                .collect(),
            g1: (0..self.g1.len()).map(|_| Dense::zeros(h, h)).collect(),
            g2: (0..self.g2.len()).map(|_| FilmLayer::zeros(h, h, c)).collect(),
            head: Dense::zeros(1, h),
            latent: h,
            cond_dim: c,
            dropout: self.dropout,
        }
    }

    pub fn config(&self) -> PredictorConfig {
        PredictorConfig {
            latent: self.latent,
            layers: self.encoder.len(),
            dropout: self.dropout,
        }
    }

    /// Every tensor in a fixed order: encoder, g1, g2, head.
    pub fn tensors(&self) -> Vec<(&[f64], ParamKind)> {
        let mut out = Vec::new();
        for l in &self.encoder {
            push_film(l, &mut out);
        }
        for d in &self.g1 {
            out.push((d.w.as_slice(), ParamKind::Weight));
            out.push((d.b.as_slice(), ParamKind::Bias));
        }
        for l in &self.g2 {
            push_film(l, &mut out);
        }
        out.push((self.head.w.as_slice(), ParamKind::Weight));
        out.push((self.head.b.as_slice(), ParamKind::Bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&mut [f64], ParamKind)> {
        let mut out = Vec::new();
        for l in &mut self.encoder {
            push_film_mut(l, &mut out);
        }
        for d in &mut self.g1 {
            out.push((d.w.as_mut_slice(), ParamKind::Weight));
            out.push((d.b.as_mut_slice(), ParamKind::Bias));
        }
        for l in &mut self.g2 {
            push_film_mut(l, &mut out);
        }
        out.push((self.head.w.as_mut_slice(), ParamKind::Weight));
        out.push((self.head.b.as_mut_slice(), ParamKind::Bias));
        out
    }

    /// Names aligned with [`tensors`](Self::tensors), e.g. `g2.1.gamma`.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |prefix: &str, layers: usize, parts: &[&str]| {
            for l in 0..layers {
                out.extend(parts.iter().map(|t| format!("{prefix}.{l}.{t}")));
            }
        };
        push("encoder", self.encoder.len(), &["w", "b", "gamma", "beta"]);
        push("g1", self.g1.len(), &["w", "b"]);
        push("g2", self.g2.len(), &["w", "b", "gamma", "beta"]);
        out.extend(["head.w".to_string(), "head.b".to_string()]);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(t, _)| t.len()).sum()
    }

    /// `self += other`, tensor by tensor.
    pub fn accumulate(&mut self, other: &PredictorParams) {
        for ((a, _), (b, _)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (t, _) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

fn push_film<'a>(l: &'a FilmLayer, out: &mut Vec<(&'a [f64], ParamKind)>) {
    out.push((l.linear.w.as_slice(), ParamKind::Weight));
    out.push((l.linear.b.as_slice(), ParamKind::Bias));
    out.push((l.gamma.as_slice(), ParamKind::Weight));
    out.push((l.beta.as_slice(), ParamKind::Weight));
}

fn push_film_mut<'a>(l: &'a mut FilmLayer, out: &mut Vec<(&'a mut [f64], ParamKind)>) {
    out.push((l.linear.w.as_mut_slice(), ParamKind::Weight));
    out.push((l.linear.b.as_mut_slice(), ParamKind::Bias));
    out.push((l.gamma.as_mut_slice(), ParamKind::Weight));
    out.push((l.beta.as_mut_slice(), ParamKind::Weight));
}

pub fn validate_config(config: &PredictorConfig) -> Result<()> {
    if config.latent == 0 || config.layers == 0 {
        return Err(Error::Config("latent width and layer count must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&config.dropout) {
        return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", config.dropout)));
    }
    Ok(())
}

/// FiLM modulations for one task: per observed variable and per target, one
/// `(γ, β)` per layer. Shared by every example drawn from that task.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditioning {
    pub encoder: Vec<Vec<Film>>,
    pub decoder: Vec<Vec<Film>>,
}

impl Conditioning {
    /// `processed` holds one row per observed variable, `targets` one row per class.
    pub fn new(params: &PredictorParams, processed: &Matrix, targets: &Matrix) -> Result<Self> {
        if processed.cols() != params.cond_dim || targets.cols() != params.cond_dim {
            return Err(Error::Domain(format!(
                "conditioning embeddings must have {} columns",
                params.cond_dim
            )));
        }
        let encoder = (0..processed.rows())
            .map(|i| params.encoder.iter().map(|l| l.modulation(processed.row(i))).collect())
            .collect();
        let decoder = (0..targets.rows())
            .map(|j| params.g2.iter().map(|l| l.modulation(targets.row(j))).collect())
            .collect();
        Ok(Conditioning { encoder, decoder })
    }

    pub fn n_inputs(&self) -> usize {
        self.encoder.len()
    }

    pub fn n_targets(&self) -> usize {
        self.decoder.len()
    }

    fn zeros_like(&self) -> Self {
        let z = |films: &Vec<Vec<Film>>| -> Vec<Vec<Film>> {
            films
                .iter()
                .map(|layers| {
                    layers
                        .iter()
                        .map(|f| Film {
                            gamma: vec![0.0; f.gamma.len()],
                            beta: vec![0.0; f.beta.len()],
                        })
                        .collect()
                })
                .collect()
        };
        Conditioning {
            encoder: z(&self.encoder),
            decoder: z(&self.decoder),
        }
    }

    fn accumulate(&mut self, other: &Conditioning) {
        let pairs = self
            .encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .zip(other.encoder.iter().chain(other.decoder.iter()));
        for (a, b) in pairs {
            for (fa, fb) in a.iter_mut().zip(b) {
                fa.gamma.iter_mut().zip(&fb.gamma).for_each(|(x, y)| *x += y);
                fa.beta.iter_mut().zip(&fb.beta).for_each(|(x, y)| *x += y);
            }
        }
    }
}

/// Cached values of one layer application.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerTrace {
    pub input: Vec<f64>,
    /// `W h + b`.
    pub affine: Vec<f64>,
    /// Argument of the ReLU (`affine` itself for unconditioned layers).
    pub activation_input: Vec<f64>,
    /// Inverted-dropout multipliers (`0` or `1/(1−p)`), absent in eval mode.
    pub dropout_mask: Option<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Everything needed to replay or differentiate one example.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    /// `[variable][layer]`.
    pub encoder: Vec<Vec<LayerTrace>>,
    pub latent: Vec<f64>,
    pub g1: Vec<LayerTrace>,
    /// `[target][layer]`.
    pub g2: Vec<Vec<LayerTrace>>,
    pub scores: Vec<f64>,
}

fn layer_forward(
    linear: &Dense,
    film: Option<&Film>,
    input: &[f64],
    dropout: Option<(&mut Rng, f64)>,
) -> LayerTrace {
    let affine = linear.apply(input);
    let activation_input: Vec<f64> = match film {
        Some(f) => affine
            .iter()
            .zip(&f.gamma)
            .zip(&f.beta)
            .map(|((a, g), b)| g * a + b)
            .collect(),
        None => affine.clone(),
    };
    let mut output: Vec<f64> = activation_input.iter().map(|&v| v.max(0.0)).collect();
    let dropout_mask = match dropout {
        Some((rng, p)) if p > 0.0 => {
            let keep = 1.0 / (1.0 - p);
            let mask: Vec<f64> = (0..output.len())
                .map(|_| if rng.uniform() < p { 0.0 } else { keep })
                .collect();
            output.iter_mut().zip(&mask).for_each(|(o, m)| *o *= m);
            Some(mask)
        }
        _ => None,
    };
    LayerTrace {
        input: input.to_vec(),
        affine,
        activation_input,
        dropout_mask,
        output,
    }
}

/// Returns `∂L/∂input`; accumulates into the linear grads and, for FiLM
/// layers, into the `(γ, β)` grads.
fn layer_backward(
    linear: &Dense,
    film: Option<&Film>,
    trace: &LayerTrace,
    upstream: &[f64],
    grad_linear: &mut Dense,
    grad_film: Option<&mut Film>,
) -> Vec<f64> {
    let mut delta: Vec<f64> = upstream.to_vec();
    if let Some(mask) = &trace.dropout_mask {
        delta.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
    }
    delta
        .iter_mut()
        .zip(&trace.activation_input)
        .for_each(|(d, &a)| {
            if a <= 0.0 {
                *d = 0.0
            }
        });
    if let (Some(f), Some(gf)) = (film, grad_film) {
        for o in 0..delta.len() {
            gf.gamma[o] += delta[o] * trace.affine[o];
            gf.beta[o] += delta[o];
            delta[o] *= f.gamma[o];
        }
    }
    let mut grad_input = vec![0.0; trace.input.len()];
    for (o, &d) in delta.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        grad_linear.b[o] += d;
        let w_row = linear.w.row(o);
        let gw_row = grad_linear.w.row_mut(o);
        for (k, &x) in trace.input.iter().enumerate() {
            gw_row[k] += d * x;
            grad_input[k] += d * w_row[k];
        }
    }
    grad_input
}

/// Runs one example. Pass a generator to apply dropout (training mode).
pub fn forward_example(
    params: &PredictorParams,
    cond: &Conditioning,
    x: &[f64],
    mut dropout_rng: Option<&mut Rng>,
) -> Result<ForwardTrace> {
    if x.len() != cond.n_inputs() {
        return Err(Error::Domain(format!(
            "example has {} values but the task has {} observed variables",
            x.len(),
            cond.n_inputs()
        )));
    }
    let p = params.dropout;
    let h = params.latent;
    let mut latent = vec![0.0; h];
    let mut encoder = Vec::with_capacity(x.len());
    for (i, &xi) in x.iter().enumerate() {
        let mut layers = Vec::with_capacity(params.encoder.len());
        let mut hidden = vec![xi];
        for (l, layer) in params.encoder.iter().enumerate() {
            let t = layer_forward(
                &layer.linear,
                Some(&cond.encoder[i][l]),
                &hidden,
                dropout_rng.as_deref_mut().map(|r| (r, p)),
            );
            hidden = t.output.clone();
            layers.push(t);
        }
        latent.iter_mut().zip(&hidden).for_each(|(a, b)| *a += b);
        encoder.push(layers);
    }

    let mut hidden = latent.clone();
    let mut g1 = Vec::with_capacity(params.g1.len());
    for layer in &params.g1 {
        let t = layer_forward(layer, None, &hidden, dropout_rng.as_deref_mut().map(|r| (r, p)));
        hidden = t.output.clone();
        g1.push(t);
    }

    let shared = hidden;
    let mut g2 = Vec::with_capacity(cond.n_targets());
    let mut scores = Vec::with_capacity(cond.n_targets());
    for films in &cond.decoder {
        let mut hidden = shared.clone();
        let mut layers = Vec::with_capacity(params.g2.len());
        for (l, layer) in params.g2.iter().enumerate() {
            let t = layer_forward(
                &layer.linear,
                Some(&films[l]),
                &hidden,
                dropout_rng.as_deref_mut().map(|r| (r, p)),
            );
            hidden = t.output.clone();
            layers.push(t);
        }
        scores.push(dot(params.head.w.row(0), &hidden) + params.head.b[0]);
        g2.push(layers);
    }
    Ok(ForwardTrace {
        encoder,
        latent,
        g1,
        g2,
        scores,
    })
}

/// Backward pass for one example. Linear-layer grads accumulate into `grads`,
/// modulation grads into `cond_grads`.
pub fn backward_example(
    params: &PredictorParams,
    cond: &Conditioning,
    trace: &ForwardTrace,
    upstream_scores: &[f64],
    grads: &mut PredictorParams,
    cond_grads: &mut Conditioning,
) {
    let h = params.latent;
    let mut grad_shared = vec![0.0; h];
    for (j, layers) in trace.g2.iter().enumerate() {
        let u = upstream_scores[j];
        if u == 0.0 {
            continue;
        }
        let last = layers.last().map_or(&trace.latent, |t| &t.output);
        grads.head.b[0] += u;
        let mut delta: Vec<f64> = params.head.w.row(0).iter().map(|w| w * u).collect();
        for (k, &v) in last.iter().enumerate() {
            grads.head.w[(0, k)] += u * v;
        }
        for l in (0..layers.len()).rev() {
            delta = layer_backward(
                &params.g2[l].linear,
                Some(&cond.decoder[j][l]),
                &layers[l],
                &delta,
                &mut grads.g2[l].linear,
                Some(&mut cond_grads.decoder[j][l]),
            );
        }
        grad_shared.iter_mut().zip(&delta).for_each(|(a, b)| *a += b);
    }

    let mut delta = grad_shared;
    for l in (0..trace.g1.len()).rev() {
        delta = layer_backward(&params.g1[l], None, &trace.g1[l], &delta, &mut grads.g1[l], None);
    }

    let grad_latent = delta;
    for (i, layers) in trace.encoder.iter().enumerate() {
        let mut delta = grad_latent.clone();
        for l in (0..layers.len()).rev() {
            delta = layer_backward(
                &params.encoder[l].linear,
                Some(&cond.encoder[i][l]),
                &layers[l],
                &delta,
                &mut grads.encoder[l].linear,
                Some(&mut cond_grads.encoder[i][l]),
            );
        }
    }
}

/// Propagates modulation grads into the `Γ`/`Β` maps and the conditioning
/// embeddings. Returns `(∂/∂processed, ∂/∂targets)`.
fn conditioning_backward(
    params: &PredictorParams,
    processed: &Matrix,
    targets: &Matrix,
    cond_grads: &Conditioning,
    grads: &mut PredictorParams,
) -> (Matrix, Matrix) {
    let mut grad_processed = Matrix::zeros(processed.rows(), processed.cols());
    let mut grad_targets = Matrix::zeros(targets.rows(), targets.cols());
    let run = |layers: &[FilmLayer],
                   grad_layers: &mut [FilmLayer],
                   films: &[Vec<Film>],
                   embeddings: &Matrix,
                   out: &mut Matrix| {
        for (i, per_layer) in films.iter().enumerate() {
            let e = embeddings.row(i);
            for (l, gf) in per_layer.iter().enumerate() {
                let layer = &layers[l];
                let gl = &mut grad_layers[l];
                for o in 0..gf.gamma.len() {
                    let (dg, db) = (gf.gamma[o], gf.beta[o]);
                    if dg == 0.0 && db == 0.0 {
                        continue;
                    }
                    let gg = gl.gamma.row_mut(o);
                    gg.iter_mut().zip(e).for_each(|(g, v)| *g += dg * v);
                    let gb = gl.beta.row_mut(o);
                    gb.iter_mut().zip(e).for_each(|(g, v)| *g += db * v);
                    let row = out.row_mut(i);
                    for (k, r) in row.iter_mut().enumerate() {
                        *r += dg * layer.gamma[(o, k)] + db * layer.beta[(o, k)];
                    }
                }
            }
        }
    };
    run(&params.encoder, &mut grads.encoder, &cond_grads.encoder, processed, &mut grad_processed);
    run(&params.g2, &mut grads.g2, &cond_grads.decoder, targets, &mut grad_targets);
    (grad_processed, grad_targets)
}

/// Gradients of a batch objective.
#[derive(Clone, Debug)]
pub struct PredictorGrads {
    pub params: PredictorParams,
    pub processed: Matrix,
    pub targets: Matrix,
}

/// Examples per work unit when a batch is split across threads. Fixed, so the
/// summation order (and hence every bit of the result) does not depend on
/// the thread count or on the `parallel` feature.
pub const EXAMPLES_PER_CHUNK: usize = 4;

/// Forward and backward over a batch sharing one task's conditioning.
///
/// `objective` maps `(example index, scores)` to `(loss, ∂loss/∂scores)`.
/// Returns the per-example losses and the summed gradients.
pub fn batch_gradients<F>(
    params: &PredictorParams,
    processed: &Matrix,
    targets: &Matrix,
    inputs: &[&[f64]],
    dropout_seeds: Option<&[u64]>,
    objective: F,
) -> Result<(Vec<f64>, PredictorGrads)>
where
    F: Fn(usize, &[f64]) -> Result<(f64, Vec<f64>)> + Sync + Send,
{
    let cond = Conditioning::new(params, processed, targets)?;
    let n_chunks = inputs.len().div_ceil(EXAMPLES_PER_CHUNK);
    let chunks = crate::par::map_range(n_chunks, |c| -> Result<(Vec<f64>, PredictorParams, Conditioning)> {
        let mut grads = params.zeros_like();
        let mut cond_grads = cond.zeros_like();
        let mut losses = Vec::new();
        let end = ((c + 1) * EXAMPLES_PER_CHUNK).min(inputs.len());
        for e in c * EXAMPLES_PER_CHUNK..end {
            let mut rng = dropout_seeds.map(|s| Rng::new(s[e]));
            let trace = forward_example(params, &cond, inputs[e], rng.as_mut())?;
            let (loss, upstream) = objective(e, &trace.scores)?;
            backward_example(params, &cond, &trace, &upstream, &mut grads, &mut cond_grads);
            losses.push(loss);
        }
        Ok((losses, grads, cond_grads))
    });
    let mut losses = Vec::with_capacity(inputs.len());
    let mut grads = params.zeros_like();
    let mut cond_grads = cond.zeros_like();
    for chunk in chunks {
        let (l, g, cg) = chunk?;
        losses.extend(l);
        grads.accumulate(&g);
        cond_grads.accumulate(&cg);
    }
    let (grad_processed, grad_targets) = conditioning_backward(params, processed, targets, &cond_grads, &mut grads);
    Ok((
        losses,
        PredictorGrads {
            params: grads,
            processed: grad_processed,
            targets: grad_targets,
        },
    ))
}

/// Gradient of `Σ_e upstream[e] · scores(example e)` for a batch (eval mode).
pub fn predict_backward(
    params: &PredictorParams,
    processed: &Matrix,
    targets: &Matrix,
    inputs: &[&[f64]],
    upstream: &[Vec<f64>],
) -> Result<PredictorGrads> {
    let (_, grads) = batch_gradients(params, processed, targets, inputs, None, |e, scores| {
        Ok((dot(scores, &upstream[e]), upstream[e].clone()))
    })?;
    Ok(grads)
}

/// `f(x_i, f_i)` in eval mode.
pub fn encode(params: &PredictorParams, x_i: f64, embedding: &[f64]) -> Result<Vec<f64>> {
    if embedding.len() != params.cond_dim {
        return Err(Error::Domain(format!(
            "embedding has length {}, expected {}",
            embedding.len(),
            params.cond_dim
        )));
    }
    let mut hidden = vec![x_i];
    for layer in &params.encoder {
        hidden = layer_forward(&layer.linear, Some(&layer.modulation(embedding)), &hidden, None).output;
    }
    Ok(hidden)
}

/// Eval-mode scores, one per target embedding.
pub fn predict(params: &PredictorParams, processed: &Matrix, targets: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    let cond = Conditioning::new(params, processed, targets)?;
    Ok(forward_example(params, &cond, x, None)?.scores)
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (j, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = j;
        }
    }
    best
}
