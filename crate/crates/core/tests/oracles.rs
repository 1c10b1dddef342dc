//! Property checks of the numeric kernels against slow, independently coded
//! references.

use proptest::prelude::*;
use sve_core::entmax::{entmax, sparsemax, AlphaParam};
use sve_core::numerics::{spectral_norm, stable_rank, svd, Matrix};
use sve_core::regularizers::orthogonality_penalty;

/// Eigenvalues of a symmetric matrix by cyclic two-sided Jacobi rotations.
fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

fn singular_values_via_gram(a: &Matrix) -> Vec<f64> {
    let gram = a.t_matmul(a);
    symmetric_eigenvalues(&gram).into_iter().map(|l| l.max(0.0).sqrt()).collect()
}

fn matrix_strategy() -> impl Strategy<Value = Matrix> {
    (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
        prop::collection::vec(-3.0f64..3.0, r * c).prop_map(move |v| Matrix::from_vec(r, c, v).unwrap())
    })
}

fn simplex_projection_by_enumeration(z: &[f64]) -> Vec<f64> {
    let d = z.len();
    let mut best = (f64::INFINITY, vec![]);
    for mask in 1u32..(1 << d) {
        let support: Vec<usize> = (0..d).filter(|i| mask >> i & 1 == 1).collect();
        let tau = (support.iter().map(|&i| z[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let p: Vec<f64> = (0..d)
            .map(|i| if support.contains(&i) { z[i] - tau } else { 0.0 })
            .collect();
        if p.iter().all(|&v| v >= -1e-12) {
            let dist: f64 = z.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum();
            if dist < best.0 {
                best = (dist, p);
            }
        }
    }
    best.1
}

proptest! {
    #[test]
    fn singular_values_match_gram_eigenvalues(a in matrix_strategy()) {
        let ours = svd(&a).unwrap().singular_values;
        let oracle = singular_values_via_gram(&a);
        let scale = oracle.first().copied().unwrap_or(0.0).max(1.0);
        for (x, y) in ours.iter().zip(&oracle) {
            // eigenvalues of AᵀA lose half the digits of small singular values
            prop_assert!((x - y).abs() <= 1e-6 * scale, "{ours:?} vs {oracle:?}");
        }
    }

    #[test]
    fn svd_reconstructs(a in matrix_strategy()) {
        let r = svd(&a).unwrap().reconstruct();
        prop_assert!(r.max_abs_diff(&a) <= 1e-10);
    }

    #[test]
    fn stable_rank_matches_oracle(a in matrix_strategy()) {
        prop_assume!(a.frobenius_norm() > 1e-3);
        let sigma = singular_values_via_gram(&a)[0];
        let oracle = a.frobenius_sq() / (sigma * sigma);
        let sr = stable_rank(&a).unwrap();
        prop_assert!((sr - oracle).abs() <= 1e-6 * oracle, "{sr} vs {oracle}");
        prop_assert!(sr >= 1.0 - 1e-9 && sr <= a.rows().min(a.cols()) as f64 + 1e-9);
        prop_assert!((spectral_norm(&a).unwrap().value - sigma).abs() <= 1e-6 * sigma);
    }

    #[test]
    fn sparsemax_is_the_simplex_projection(z in prop::collection::vec(-2.0f64..2.0, 1..8)) {
        let p = sparsemax(&z);
        let q = simplex_projection_by_enumeration(&z);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn entmax_is_a_distribution_that_respects_order(
        z in prop::collection::vec(-3.0f64..3.0, 2..10),
        alpha in 1.01f64..2.5,
    ) {
        let p = entmax(&z, AlphaParam::fixed(alpha)).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        for i in 0..z.len() {
            for j in 0..z.len() {
                if z[i] > z[j] {
                    prop_assert!(p[i] >= p[j]);
                }
            }
        }
    }

    #[test]
    fn orthogonality_penalty_matches_singular_values(
        a in (1usize..6).prop_flat_map(|n| {
            prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| Matrix::from_vec(n, n, v).unwrap())
        })
    ) {
        let (value, _) = orthogonality_penalty(&a).unwrap();
        let sv = singular_values_via_gram(&a);
        // ‖AᵀA − I‖² = Σ (σ² − 1)²
        let oracle: f64 = sv.iter().map(|s| (s * s - 1.0).powi(2)).sum();
        prop_assert!((value - oracle).abs() <= 1e-6 * oracle.max(1.0));
    }
}
