//! Raw, shared and target variable embeddings, and the cross-attention that
//! turns raw embeddings into processed ones: `F = kernel(Z Sᵀ / √C) S`.
//! Target embeddings bypass attention and feed the decoder directly.

use serde::{Deserialize, Serialize};

use crate::entmax::AttentionKernel;
use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix, Rng};
use crate::task_data::TaskBundle;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Gaussian,
    /// `S` is a random rotation (orthogonal, det = +1). Requires `D = C`.
    OrthogonalDetPlusOne,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitScheme {
    pub kind: InitKind,
    /// Standard deviation of the Gaussian draws (all of `Z`, `Z_out`, and `S`
    /// unless `S` is orthogonal).
    pub std: f64,
}

impl InitScheme {
    pub fn gaussian(std: f64) -> Self {
        InitScheme {
            kind: InitKind::Gaussian,
            std,
        }
    }

    pub fn orthogonal(std: f64) -> Self {
        InitScheme {
            kind: InitKind::OrthogonalDetPlusOne,
            std,
        }
    }
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme::gaussian(1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    /// Raw observed-variable embeddings, `N × C`.
    pub z: Matrix,
    /// Shared embeddings, `D × C`.
    pub s: Matrix,
    /// Target-variable embeddings, `M × C`.
    pub z_out: Matrix,
}

impl EmbeddingStore {
    pub fn dim(&self) -> usize {
        self.s.cols()
    }

    pub fn shared_count(&self) -> usize {
        self.s.rows()
    }
}

/// Draws `Z`, then `Z_out`, then `S` from `rng`.
pub fn init_store(bundle: &TaskBundle, c: usize, d: usize, scheme: InitScheme, rng: &mut Rng) -> Result<EmbeddingStore> {
    if c == 0 || d == 0 {
        return Err(Error::Config("embedding dimension and shared count must be at least 1".into()));
    }
    if !(scheme.std > 0.0) {
        return Err(Error::Config(format!("init std must be positive, got {}", scheme.std)));
    }
    if scheme.kind == InitKind::OrthogonalDetPlusOne && c != d {
        return Err(Error::Config(format!(
            "orthogonal initialization needs a square shared matrix, got D = {d}, C = {c}"
        )));
    }
    let std = scheme.std;
    let z = Matrix::from_fn(bundle.n_inputs(), c, |_, _| std * rng.normal());
    let z_out = Matrix::from_fn(bundle.n_targets(), c, |_, _| std * rng.normal());
    let s = match scheme.kind {
        InitKind::Gaussian => Matrix::from_fn(d, c, |_, _| std * rng.normal()),
        InitKind::OrthogonalDetPlusOne => random_rotation(d, rng)?,
    };
    Ok(EmbeddingStore { z, s, z_out })
}

/// Haar-distributed orthogonal matrix with determinant +1: QR of a Gaussian
/// matrix (Gram-Schmidt, applied twice), with the last column negated if the
/// determinant comes out −1.
pub fn random_rotation(n: usize, rng: &mut Rng) -> Result<Matrix> {
    let g = Matrix::from_fn(n, n, |_, _| rng.normal());
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = g.column(j);
        for _ in 0..2 {
            for q in &cols {
                let proj = dot(&v, q);
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= proj * qi);
            }
        }
        let len = dot(&v, &v).sqrt();
        if len < 1e-10 {
            return Err(Error::Numerical("degenerate Gaussian draw in random rotation".into()));
        }
        // Sign convention R_jj > 0 keeps the distribution Haar.
        let r_jj = dot(&g.column(j), &v) / len;
        let sign = if r_jj < 0.0 { -1.0 } else { 1.0 };
        cols.push(v.iter().map(|x| sign * x / len).collect());
    }
    let mut q = Matrix::from_fn(n, n, |i, j| cols[j][i]);
    if q.determinant()? < 0.0 {
        for i in 0..n {
            q[(i, n - 1)] = -q[(i, n - 1)];
        }
    }
    Ok(q)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessedEmbeddings {
    /// One processed embedding per requested row, `rows × C`.
    pub f: Matrix,
    /// Attention distribution over shared embeddings, `rows × D`.
    pub probs: Matrix,
}

fn check_rows(store: &EmbeddingStore, rows: &[usize]) -> Result<()> {
    match rows.iter().find(|&&r| r >= store.z.rows()) {
        Some(r) => Err(Error::Domain(format!(
            "variable index {r} out of range for {} raw embeddings",
            store.z.rows()
        ))),
        None => Ok(()),
    }
}

pub fn attend(store: &EmbeddingStore, rows: &[usize], kernel: &AttentionKernel) -> Result<ProcessedEmbeddings> {
    check_rows(store, rows)?;
    let scale = 1.0 / (store.dim() as f64).sqrt();
    let d = store.shared_count();
    let mut probs = Matrix::zeros(rows.len(), d);
    for (r, &row) in rows.iter().enumerate() {
        let query = store.z.row(row);
        let logits: Vec<f64> = (0..d).map(|k| scale * dot(query, store.s.row(k))).collect();
        probs.row_mut(r).copy_from_slice(&kernel.forward(&logits)?);
    }
    let f = probs.matmul(&store.s);
    Ok(ProcessedEmbeddings { f, probs })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionGrads {
    /// Gradient for each requested row of `Z`, aligned with `rows`.
    pub z_rows: Matrix,
    pub s: Matrix,
    pub alpha: f64,
}

/// Backpropagates `∂L/∂F` through `F = P S` and `P = kernel(Z Sᵀ/√C)`.
/// `S` receives both the value path `Pᵀ ∂F` and the key path.
pub fn attend_backward(
    store: &EmbeddingStore,
    rows: &[usize],
    kernel: &AttentionKernel,
    forward: &ProcessedEmbeddings,
    upstream_f: &Matrix,
) -> Result<AttentionGrads> {
    check_rows(store, rows)?;
    if upstream_f.shape() != forward.f.shape() || forward.f.rows() != rows.len() {
        return Err(Error::Contract("attention backward: shape mismatch with forward pass".into()));
    }
    let scale = 1.0 / (store.dim() as f64).sqrt();
    let mut grad_s = forward.probs.t_matmul(upstream_f);
    // ∂L/∂P = ∂L/∂F · Sᵀ
    let grad_p = upstream_f.matmul(&store.s.transpose());
    let mut z_rows = Matrix::zeros(rows.len(), store.dim());
    let mut alpha = 0.0;
    for (r, &row) in rows.iter().enumerate() {
        let (grad_logits, grad_alpha) = kernel.backward(forward.probs.row(r), grad_p.row(r))?;
        alpha += grad_alpha;
        let query = store.z.row(row);
        let gz = z_rows.row_mut(r);
        for (k, &gl) in grad_logits.iter().enumerate() {
            if gl == 0.0 {
                continue;
            }
            let g = gl * scale;
            for (out, &sk) in gz.iter_mut().zip(store.s.row(k)) {
                *out += g * sk;
            }
            for (out, &q) in grad_s.row_mut(k).iter_mut().zip(query) {
                *out += g * q;
            }
        }
    }
    Ok(AttentionGrads {
        z_rows,
        s: grad_s,
        alpha,
    })
}
