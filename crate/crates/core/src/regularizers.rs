//! Independence penalties on the shared embedding matrix `S`.
//!
//! * orthogonality: `‖SᵀS − I‖_F²` (square `S` only)
//! * stable rank: `C − ‖S‖_F² / σ_max²`
//! * von Neumann entropy: `V(R) = −Σ σ_i² ln σ_i²` of the row-sum-normalized `R`
//!
//! Each returns its value and the gradient of that value with respect to `S`.
//! The entropy term enters the loss with a negative sign; see
//! [`Regularizer::apply`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{svd, Matrix};

/// Singular values below this are dropped from the entropy and its gradient.
pub const VN_SIGMA_FLOOR: f64 = 1e-12;
const ROW_SUM_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    #[default]
    None,
    Orthogonality,
    StableRank,
    VonNeumann,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regularizer {
    pub kind: RegularizerKind,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct PenaltyTerm {
    /// Contribution to the loss (already weighted and signed).
    pub loss: f64,
    /// Gradient of `loss` with respect to `S`.
    pub grad: Matrix,
}

impl Regularizer {
    pub fn none() -> Self {
        Regularizer::default()
    }

    pub fn new(kind: RegularizerKind, weight: f64) -> Self {
        Regularizer { kind, weight }
    }

    pub fn validate(&self, s_shape: (usize, usize)) -> Result<()> {
        if !(self.weight >= 0.0) || !self.weight.is_finite() {
            return Err(Error::Config(format!("regularizer weight must be ≥ 0, got {}", self.weight)));
        }
        if self.kind == RegularizerKind::Orthogonality && s_shape.0 != s_shape.1 {
            return Err(Error::Config(format!(
                "orthogonality penalty needs D = C, got {}x{}",
                s_shape.0, s_shape.1
            )));
        }
        Ok(())
    }

    /// Weighted loss term: `+w·L_orth`, `+w·(C − sr)`, or `−w·V(R)`.
    pub fn apply(&self, s: &Matrix) -> Result<Option<PenaltyTerm>> {
        let (value, grad, sign) = match self.kind {
            RegularizerKind::None => return Ok(None),
            RegularizerKind::Orthogonality => {
                let (v, g) = orthogonality_penalty(s)?;
                (v, g, 1.0)
            }
            RegularizerKind::StableRank => {
                let (v, g) = stable_rank_penalty(s)?;
                (v, g, 1.0)
            }
            RegularizerKind::VonNeumann => {
                let (v, g) = von_neumann_penalty(s)?;
                (v, g, -1.0)
            }
        };
        let factor = sign * self.weight;
        Ok(Some(PenaltyTerm {
            loss: factor * value,
            grad: grad.scale(factor),
        }))
    }
}

/// `Σ_{i=j} (1 − G_ij)² + Σ_{i≠j} G_ij²` with `G = SᵀS`; gradient `4 S (G − I)`.
pub fn orthogonality_penalty(s: &Matrix) -> Result<(f64, Matrix)> {
    if s.rows() != s.cols() {
        return Err(Error::Config(format!(
            "orthogonality penalty needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let n = s.cols();
    let gram = s.t_matmul(s);
    let mut value = 0.0;
    for i in 0..n {
        for j in 0..n {
            let g = gram[(i, j)];
            value += if i == j { (1.0 - g).powi(2) } else { g * g };
        }
    }
    let residual = gram.sub(&Matrix::identity(n));
    Ok((value, s.matmul(&residual).scale(4.0)))
}

/// Relative gap under which singular values count as tied with `σ_max`.
pub const SPECTRAL_TIE_TOLERANCE: f64 = 1e-9;

/// `C − sr(S)` with `sr = ‖S‖_F² / σ_max²`.
///
/// `∂sr/∂S = 2S/σ² − 2‖S‖_F² u vᵀ / σ³`, returned negated. When `σ_max` is
/// repeated `u vᵀ` is replaced by the mean of `u_i v_iᵀ` over the tied
/// pairs, so the gradient vanishes when all singular values are equal.
pub fn stable_rank_penalty(s: &Matrix) -> Result<(f64, Matrix)> {
    if s.as_slice().iter().all(|&v| v == 0.0) {
        return Err(Error::Domain("stable rank of the zero matrix is undefined".into()));
    }
    let dec = svd(s)?;
    let sigma = dec.singular_values[0];
    let tied: Vec<usize> = (0..dec.singular_values.len())
        .filter(|&i| sigma - dec.singular_values[i] <= SPECTRAL_TIE_TOLERANCE * sigma)
        .collect();
    let mut top = Matrix::zeros(s.rows(), s.cols());
    for &i in &tied {
        top.add_scaled(
            &Matrix::outer(&dec.left_vectors.column(i), &dec.right_vectors.column(i)),
            1.0 / tied.len() as f64,
        );
    }
    let fro = s.frobenius_sq();
    let sr = fro / (sigma * sigma);
    let mut grad = s.scale(-2.0 / (sigma * sigma));
    grad.add_scaled(&top, 2.0 * fro / sigma.powi(3));
    Ok((s.cols() as f64 - sr, grad))
}

/// Divides each row by its sum.
pub fn row_sum_normalize(s: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let sums: Vec<f64> = (0..s.rows()).map(|i| s.row(i).iter().sum()).collect();
    if let Some(i) = sums.iter().position(|v| v.abs() < ROW_SUM_FLOOR) {
        return Err(Error::Domain(format!(
            "row {i} of the shared matrix sums to {:e}; cannot normalize",
            sums[i]
        )));
    }
    let r = Matrix::from_fn(s.rows(), s.cols(), |i, j| s[(i, j)] / sums[i]);
    Ok((r, sums))
}

/// `−Σ σ_i² ln σ_i²` over the singular values of `a`, skipping σ below the floor.
pub fn von_neumann_entropy(a: &Matrix) -> Result<f64> {
    Ok(svd(a)?
        .singular_values
        .iter()
        .filter(|&&s| s > VN_SIGMA_FLOOR)
        .map(|&s| -(s * s) * (s * s).ln())
        .sum())
}

/// `V(R)` for `R` the row-sum normalization of `S`, with its gradient in `S`.
///
/// `∂V/∂R = −Σ 2σ_i (ln σ_i² + 1) u_i v_iᵀ`, then
/// `∂V/∂S_ij = (∂V/∂R_ij − Σ_k ∂V/∂R_ik R_ik) / r_i`.
pub fn von_neumann_penalty(s: &Matrix) -> Result<(f64, Matrix)> {
    let (r, sums) = row_sum_normalize(s)?;
    let dec = svd(&r)?;
    let mut value = 0.0;
    let mut grad_r = Matrix::zeros(r.rows(), r.cols());
    for (i, &sigma) in dec.singular_values.iter().enumerate() {
        if sigma <= VN_SIGMA_FLOOR {
            continue;
        }
        let sq = sigma * sigma;
        value -= sq * sq.ln();
        let coeff = -2.0 * sigma * (sq.ln() + 1.0);
        grad_r.add_scaled(
            &Matrix::outer(&dec.left_vectors.column(i), &dec.right_vectors.column(i)),
            coeff,
        );
    }
    let mut grad = Matrix::zeros(s.rows(), s.cols());
    for i in 0..s.rows() {
        let inner: f64 = grad_r.row(i).iter().zip(r.row(i)).map(|(g, x)| g * x).sum();
        for j in 0..s.cols() {
            grad[(i, j)] = (grad_r[(i, j)] - inner) / sums[i];
        }
    }
    Ok((value, grad))
}
