use super::matrix::{dot, norm, Matrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
const ROTATION_TOL: f64 = 1e-15;

/// Thin singular value decomposition `A = U diag(σ) Vᵀ`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// Descending, nonnegative.
    pub singular_values: Vec<f64>,
    /// `rows × k` with orthonormal columns, `k = min(rows, cols)`.
    pub left_vectors: Matrix,
    /// `cols × k` with orthonormal columns.
    pub right_vectors: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let (m, k) = self.left_vectors.shape();
        let scaled = Matrix::from_fn(m, k, |i, j| self.left_vectors[(i, j)] * self.singular_values[j]);
        scaled.matmul(&self.right_vectors.transpose())
    }
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Columns of the working copy are rotated pairwise until mutually orthogonal;
/// their norms are then the singular values. Wide inputs are handled through
/// the transpose.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(Error::Domain("svd input contains non-finite entries".into()));
    }
    if a.rows() < a.cols() {
        let t = svd(&a.transpose())?;
        return Ok(SvdResult {
            singular_values: t.singular_values,
            left_vectors: t.right_vectors,
            right_vectors: t.left_vectors,
        });
    }
    let (m, n) = a.shape();
    // Rows of `w` are the columns of A; rows of `v` are the columns of V.
    let mut w = a.transpose();
    let mut v = Matrix::identity(n);

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(w.row(p), w.row(p));
                let beta = dot(w.row(q), w.row(q));
                let gamma = dot(w.row(p), w.row(q));
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= ROTATION_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut w, p, q, c, s);
                rotate_rows(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "jacobi svd did not converge within {MAX_SWEEPS} sweeps"
        )));
    }

    let sigma: Vec<f64> = (0..n).map(|j| norm(w.row(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));

    let singular_values: Vec<f64> = order.iter().map(|&j| sigma[j]).collect();
    let scale = singular_values.first().copied().unwrap_or(0.0);
    let mut u_cols: Vec<Option<Vec<f64>>> = order
        .iter()
        .map(|&j| {
            let s = sigma[j];
            if s > scale * 1e-14 && s > 0.0 {
                Some(w.row(j).iter().map(|x| x / s).collect())
            } else {
                None
            }
        })
        .collect();
    complete_orthonormal(&mut u_cols, m);

    let left_vectors = Matrix::from_fn(m, n, |i, j| u_cols[j].as_ref().unwrap()[i]);
    let right_vectors = Matrix::from_fn(n, n, |i, j| v[(order[j], i)]);
    Ok(SvdResult {
        singular_values,
        left_vectors,
        right_vectors,
    })
}

fn rotate_rows(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * cols);
    let row_p = &mut head[p * cols..(p + 1) * cols];
    let row_q = &mut tail[..cols];
    for (x, y) in row_p.iter_mut().zip(row_q.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fill missing columns with unit vectors orthogonal to the present ones
/// (Gram-Schmidt against the standard basis).
fn complete_orthonormal(cols: &mut [Option<Vec<f64>>], dim: usize) {
    let mut candidate = 0;
    for idx in 0..cols.len() {
        if cols[idx].is_some() {
            continue;
        }
        while candidate < dim {
            let mut e = vec![0.0; dim];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for other in cols.iter().flatten() {
                    let proj = dot(&e, other);
                    for (x, o) in e.iter_mut().zip(other) {
                        *x -= proj * o;
                    }
                }
            }
            let len = norm(&e);
            if len > 1e-8 {
                e.iter_mut().for_each(|x| *x /= len);
                cols[idx] = Some(e);
                break;
            }
        }
    }
}

/// Largest singular value with its singular vector pair, by power iteration on `AᵀA`.
#[derive(Clone, Debug)]
pub struct SpectralNorm {
    pub value: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

pub const POWER_ITERATION_CAP: usize = 10_000;
const POWER_ITERATION_TOL: f64 = 1e-12;

pub fn spectral_norm(a: &Matrix) -> Result<SpectralNorm> {
    if !a.is_finite() {
        return Err(Error::Domain("spectral norm input contains non-finite entries".into()));
    }
    // Start from the largest row: A·(that row) is nonzero whenever A is.
    let start = (0..a.rows())
        .max_by(|&i, &j| norm(a.row(i)).total_cmp(&norm(a.row(j))))
        .ok_or_else(|| Error::Domain("spectral norm of an empty matrix".into()))?;
    let mut v = a.row(start).to_vec();
    let len = norm(&v);
    if len == 0.0 {
        return Err(Error::Domain("spectral norm of a zero matrix".into()));
    }
    v.iter_mut().for_each(|x| *x /= len);

    let mut u = a.mul_vec(&v);
    let mut sigma = norm(&u);
    for _ in 0..POWER_ITERATION_CAP {
        let mut next = a.t_mul_vec(&u);
        let len = norm(&next);
        if len == 0.0 {
            break;
        }
        next.iter_mut().for_each(|x| *x /= len);
        let next_u = a.mul_vec(&next);
        let next_sigma = norm(&next_u);
        let delta = (next_sigma - sigma).abs();
        v = next;
        u = next_u;
        sigma = next_sigma;
        if delta <= POWER_ITERATION_TOL * sigma {
            break;
        }
    }
    u.iter_mut().for_each(|x| *x /= sigma);
    Ok(SpectralNorm {
        value: sigma,
        left: u,
        right: v,
    })
}

/// `‖A‖_F² / σ_max²`.
pub fn stable_rank(a: &Matrix) -> Result<f64> {
    let sigma = spectral_norm(a)?.value;
    Ok(a.frobenius_sq() / (sigma * sigma))
}
