//! The α-entmax family of probability mappings.
//!
//! `entmax(z, α) = argmax_{p ∈ Δ} pᵀz + H_α(p)` with the Tsallis entropy
//! `H_α(p) = Σ (p_j − p_j^α) / (α(α − 1))`. α = 1 recovers softmax, α = 2
//! sparsemax. The stationarity condition gives
//! `p_j = [(α − 1)(z_j − τ)]₊^{1/(α−1)}`, with τ found by bisection so the
//! entries sum to one. The same closed form is used for 0 < α < 1, where the
//! output stays dense.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this distance from 1, α is evaluated as softmax.
pub const SOFTMAX_BRANCH: f64 = 1e-4;
pub const ALPHA_MIN: f64 = 0.25;
pub const ALPHA_MAX: f64 = 3.0;

const BISECTION_ITERS: usize = 100;
const BISECTION_TOL: f64 = 1e-12;
const BISECTION_FAIL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaParam {
    pub value: f64,
    pub learnable: bool,
}

impl AlphaParam {
    pub fn fixed(value: f64) -> Self {
        AlphaParam { value, learnable: false }
    }

    pub fn learnable(value: f64) -> Self {
        AlphaParam { value, learnable: true }
    }

    /// Keeps a learned α inside `[ALPHA_MIN, ALPHA_MAX]`.
    pub fn clamp(&mut self) {
        self.value = self.value.clamp(ALPHA_MIN, ALPHA_MAX);
    }
}

/// Probability mapping used by the attention step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttentionKernel {
    Softmax,
    Entmax { alpha: AlphaParam },
}

impl AttentionKernel {
    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self {
            AttentionKernel::Softmax => Ok(softmax(z)),
            AttentionKernel::Entmax { alpha } => entmax(z, *alpha),
        }
    }

    /// Returns `(∂/∂z, ∂/∂α)` of `upstream · p`.
    pub fn backward(&self, p: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, f64)> {
        match self {
            AttentionKernel::Softmax => Ok((softmax_backward(p, upstream), 0.0)),
            AttentionKernel::Entmax { alpha } => entmax_backward(p, *alpha, upstream),
        }
    }

    pub fn alpha(&self) -> Option<AlphaParam> {
        match self {
            AttentionKernel::Softmax => None,
            AttentionKernel::Entmax { alpha } => Some(*alpha),
        }
    }

    pub fn learns_alpha(&self) -> bool {
        self.alpha().is_some_and(|a| a.learnable)
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    p
}

/// Euclidean projection onto the simplex (sort-and-threshold).
pub fn sparsemax(z: &[f64]) -> Vec<f64> {
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut support_sum = 0.0;
    let mut support = 0;
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        if 1.0 + (k + 1) as f64 * v > cumsum {
            support = k + 1;
            support_sum = cumsum;
        }
    }
    let tau = (support_sum - 1.0) / support as f64;
    z.iter().map(|&v| (v - tau).max(0.0)).collect()
}

pub fn entmax(z: &[f64], alpha: AlphaParam) -> Result<Vec<f64>> {
    let a = alpha.value;
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("entmax requires α > 0, got {a}")));
    }
    if z.is_empty() {
        return Err(Error::Domain("entmax of an empty vector".into()));
    }
    if (a - 1.0).abs() < SOFTMAX_BRANCH {
        return Ok(softmax(z));
    }
    if a == 2.0 {
        return Ok(sparsemax(z));
    }
    let (p, _) = entmax_threshold(z, a)?;
    Ok(p)
}

/// Solves `Σ_j [(α−1)(z_j − τ)]₊^{1/(α−1)} = 1` for τ. Returns normalized p and τ.
pub(crate) fn entmax_threshold(z: &[f64], alpha: f64) -> Result<(Vec<f64>, f64)> {
    let beta = alpha - 1.0;
    let inv = 1.0 / beta;
    let d = z.len() as f64;
    let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // p_max = 1 at `lo` (sum ≥ 1); every p_j ≤ 1/d at `hi` (sum ≤ 1).
    let mut lo = zmax - inv;
    let mut hi = zmax - d.powf(-beta) * inv;
    let eval = |tau: f64, out: &mut Vec<f64>| -> f64 {
        out.clear();
        out.extend(z.iter().map(|&v| {
            let base = beta * (v - tau);
            if base > 0.0 {
                base.powf(inv)
            } else {
                0.0
            }
        }));
        out.iter().sum::<f64>()
    };
    let mut p = Vec::with_capacity(z.len());
    let mut tau = 0.5 * (lo + hi);
    let mut residual = f64::INFINITY;
    for _ in 0..BISECTION_ITERS {
        tau = 0.5 * (lo + hi);
        let sum = eval(tau, &mut p);
        residual = sum - 1.0;
        if residual.abs() < BISECTION_TOL {
            break;
        }
        // The sum decreases in τ for every α ≠ 1.
        if residual > 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
    }
    if !(residual.abs() < BISECTION_FAIL) {
        return Err(Error::Numerical(format!(
            "entmax bisection did not converge for α = {alpha} (residual {residual:e})"
        )));
    }
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    Ok((p, tau))
}

fn softmax_backward(p: &[f64], upstream: &[f64]) -> Vec<f64> {
    let inner: f64 = p.iter().zip(upstream).map(|(a, b)| a * b).sum();
    p.iter().zip(upstream).map(|(pi, gi)| pi * (gi - inner)).collect()
}

/// Vector-Jacobian product of [`entmax`] with respect to `z` and α.
///
/// With `s_i = p_i^{2−α}` on the support, `∂p/∂z = diag(s) − s sᵀ / Σs`.
/// The α-derivative is `∂p/∂α = g − s Σg / Σs` with
/// `g_i = p_i / (α−1)² − p_i ln p_i / (α−1)`; inside the softmax branch its
/// limit `p_i (Σ_k p_k ln² p_k − ln² p_i) / 2` is used instead.
pub fn entmax_backward(p: &[f64], alpha: AlphaParam, upstream: &[f64]) -> Result<(Vec<f64>, f64)> {
    if p.len() != upstream.len() {
        return Err(Error::Contract(format!(
            "entmax backward: p has {} entries, upstream {}",
            p.len(),
            upstream.len()
        )));
    }
    let total: f64 = p.iter().sum();
    if p.iter().any(|&v| !(v >= 0.0)) || (total - 1.0).abs() > 1e-6 {
        return Err(Error::Contract("entmax backward: p is not a probability vector".into()));
    }
    let a = alpha.value;
    let ln_p = |v: f64| if v > 0.0 { v.ln() } else { 0.0 };

    if (a - 1.0).abs() < SOFTMAX_BRANCH {
        let grad_z = softmax_backward(p, upstream);
        let grad_alpha = if alpha.learnable {
            let second: f64 = p.iter().map(|&v| v * ln_p(v).powi(2)).sum();
            p.iter()
                .zip(upstream)
                .map(|(&v, &g)| g * 0.5 * v * (second - ln_p(v).powi(2)))
                .sum()
        } else {
            0.0
        };
        return Ok((grad_z, grad_alpha));
    }

    let s: Vec<f64> = p
        .iter()
        .map(|&v| if v > 0.0 { v.powf(2.0 - a) } else { 0.0 })
        .collect();
    let s_sum: f64 = s.iter().sum();
    let s_dot: f64 = s.iter().zip(upstream).map(|(x, g)| x * g).sum();
    let grad_z: Vec<f64> = s
        .iter()
        .zip(upstream)
        .map(|(si, gi)| si * (gi - s_dot / s_sum))
        .collect();

    let grad_alpha = if alpha.learnable {
        let beta = a - 1.0;
        let g: Vec<f64> = p
            .iter()
            .map(|&v| v / (beta * beta) - v * ln_p(v) / beta)
            .collect();
        let g_sum: f64 = g.iter().sum();
        g.iter()
            .zip(&s)
            .zip(upstream)
            .map(|((gi, si), ui)| ui * (gi - si * g_sum / s_sum))
            .sum()
    } else {
        0.0
    };
    Ok((grad_z, grad_alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_difference_gradient, max_relative_error, Rng};

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn softmax_examples() {
        assert_close(&softmax(&[0.0, 0.0, 0.0]), &[1.0 / 3.0; 3], 1e-15);
        let e = std::f64::consts::E;
        assert_close(&softmax(&[1.0, 0.0]), &[e / (e + 1.0), 1.0 / (e + 1.0)], 1e-15);
        assert_close(&softmax(&[1.0, 0.0]), &[0.7311, 0.2689], 1e-4);
        assert_close(&softmax(&[101.0, 100.0]), &softmax(&[1.0, 0.0]), 1e-12);
    }

    #[test]
    fn sparsemax_examples() {
        assert_close(&sparsemax(&[0.0, 0.0]), &[0.5, 0.5], 0.0);
        assert_close(&sparsemax(&[1.0, 0.0]), &[1.0, 0.0], 0.0);
        assert_close(&sparsemax(&[0.6, 0.4, 0.0]), &[0.6, 0.4, 0.0], 1e-15);
    }

    #[test]
    fn entmax_limits() {
        let z = [0.3, -1.2, 2.0, 0.7];
        assert_close(&entmax(&z, AlphaParam::fixed(1.0)).unwrap(), &softmax(&z), 1e-6);
        assert_close(&entmax(&z, AlphaParam::fixed(2.0)).unwrap(), &sparsemax(&z), 1e-6);
        // bisection path near 2 also agrees with sparsemax
        assert_close(&entmax(&z, AlphaParam::fixed(2.0 + 1e-9)).unwrap(), &sparsemax(&z), 1e-6);
    }

    #[test]
    fn large_margin_is_fully_sparse() {
        let z = [10.0, 0.0, 0.0];
        let (p, tau) = entmax_threshold(&z, 1.5).unwrap();
        assert_close(&p, &[1.0, 0.0, 0.0], 1e-9);
        let residual: f64 = z
            .iter()
            .map(|&v| (0.5 * (v - tau)).max(0.0).powf(2.0))
            .sum::<f64>()
            - 1.0;
        assert!(residual.abs() < 1e-12);
        assert_eq!(p.iter().filter(|&&v| v > 0.0).count(), 1);
    }

    #[test]
    fn sub_one_alpha_is_dense_and_normalized() {
        let z = [2.0, -3.0, 0.5, 0.0];
        for a in [0.5, 0.83, 0.9] {
            let p = entmax(&z, AlphaParam::fixed(a)).unwrap();
            assert!(p.iter().all(|&v| v > 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn continuity_across_alpha_one() {
        let z = [0.1, 1.5, -0.4, 0.9, 0.0];
        let soft = softmax(&z);
        for a in [1.0 - 1e-6, 1.0 + 1e-6, 1.0 - 2e-4, 1.0 + 2e-4] {
            let p = entmax(&z, AlphaParam::fixed(a)).unwrap();
            let dist = p.iter().zip(&soft).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(dist <= 1e-4, "α = {a}: {dist}");
        }
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(entmax(&[1.0, 2.0], AlphaParam::fixed(0.0)).is_err());
        assert!(entmax(&[1.0, 2.0], AlphaParam::fixed(-1.0)).is_err());
    }

    #[test]
    fn softmax_jacobian_at_alpha_one() {
        let p = softmax(&[0.2, -0.5, 1.0]);
        for k in 0..3 {
            let mut e = [0.0; 3];
            e[k] = 1.0;
            let (g, _) = entmax_backward(&p, AlphaParam::fixed(1.0), &e).unwrap();
            for i in 0..3 {
                let expected = if i == k { p[i] - p[i] * p[k] } else { -p[i] * p[k] };
                assert!((g[i] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn saturated_sparsemax_has_zero_gradient() {
        let p = sparsemax(&[5.0, 0.0, -1.0]);
        let (g, _) = entmax_backward(&p, AlphaParam::fixed(2.0), &[0.3, -1.0, 2.0]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_mismatched_p() {
        let a = AlphaParam::fixed(1.5);
        assert!(entmax_backward(&[0.5, 0.5], a, &[1.0]).is_err());
        assert!(entmax_backward(&[0.7, 0.7], a, &[1.0, 1.0]).is_err());
    }

    fn fd_check(z: &[f64], alpha: f64, seed: u64) -> (f64, f64) {
        let mut rng = Rng::new(seed);
        let upstream: Vec<f64> = (0..z.len()).map(|_| rng.normal()).collect();
        let a = AlphaParam::learnable(alpha);
        let p = entmax(z, a).unwrap();
        let (gz, ga) = entmax_backward(&p, a, &upstream).unwrap();
        let objective = |zz: &[f64], aa: f64| -> Result<f64> {
            let q = entmax(zz, AlphaParam::fixed(aa))?;
            Ok(q.iter().zip(&upstream).map(|(x, y)| x * y).sum())
        };
        let fd_z = finite_difference_gradient(|zz| objective(zz, alpha), z, 1e-5).unwrap();
        let fd_a = finite_difference_gradient(|aa| objective(z, aa[0]), &[alpha], 1e-5).unwrap();
        (
            max_relative_error(&gz, &fd_z, 1e-6),
            max_relative_error(&[ga], &fd_a, 1e-6),
        )
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = Rng::new(17);
        let z: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        for alpha in [0.6, 0.9, 1.05, 1.3, 1.5, 1.8] {
            let (ez, ea) = fd_check(&z, alpha, 3);
            assert!(ez < 1e-4 && ea < 1e-4, "α = {alpha}: z {ez:e}, α {ea:e}");
        }
    }

    #[test]
    fn alpha_gradient_limit_inside_softmax_branch() {
        // Compare the branch formula against a difference taken straddling α = 1
        // with steps large enough to leave the branch.
        let z = [0.4, -0.3, 1.1, 0.0];
        let up = [1.0, -2.0, 0.5, 0.3];
        let p = softmax(&z);
        let (_, ga) = entmax_backward(&p, AlphaParam::learnable(1.0), &up).unwrap();
        let h = 1e-3;
        let f = |a: f64| -> f64 {
            entmax(&z, AlphaParam::fixed(a)).unwrap().iter().zip(&up).map(|(x, y)| x * y).sum()
        };
        let fd = (f(1.0 + h) - f(1.0 - h)) / (2.0 * h);
        assert!((ga - fd).abs() <= 1e-4 * fd.abs().max(1e-3), "{ga} vs {fd}");
    }
}
