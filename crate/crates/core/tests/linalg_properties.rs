#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use specmuon_core::linalg::{frobenius_inner, frobenius_norm, newton_schulz_orthogonalize, thin_svd, Matrix};

fn matrix(max_dim: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |v| Matrix::from_vec(r, c, v).unwrap())
    })
}

/// Symmetric eigenvalues by cyclic Jacobi rotations on a dense copy; an oracle
/// independent of the one-sided SVD sweep.
fn sym_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j].powi(2))
            .sum();
        if off < 1e-30 {
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

proptest! {
    #[test]
    fn svd_reconstructs_and_is_orthonormal(g in matrix(7)) {
        let k = g.min_dim();
        let f = thin_svd(&g, k).unwrap();
        let scale = frobenius_norm(&g).max(1.0);
        prop_assert!(f.reconstruct().max_abs_diff(&g).unwrap() <= 1e-10 * scale);
        prop_assert!(f.sigma().windows(2).all(|w| w[0] >= w[1]));
        for i in 0..f.rank() {
            for j in 0..f.rank() {
                let want = if i == j { 1.0 } else { 0.0 };
                let uu: f64 = f.u(i).iter().zip(f.u(j)).map(|(a, b)| a * b).sum();
                let vv: f64 = f.v(i).iter().zip(f.v(j)).map(|(a, b)| a * b).sum();
                prop_assert!((uu - want).abs() <= 1e-10);
                prop_assert!((vv - want).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn singular_values_match_gram_eigenvalues(g in matrix(6)) {
        let f = thin_svd(&g, g.min_dim()).unwrap();
        let gram = g.t_matmul(&g).unwrap();
        let ev = sym_eigenvalues(&gram);
        let top = ev[0].max(1e-300);
        for (i, s) in f.sigma().iter().enumerate() {
            prop_assert!((s * s - ev[i]).abs() <= 1e-9 * top);
        }
    }

    #[test]
    fn truncation_keeps_leading_factors(g in matrix(6), k in 0usize..6) {
        let k = k.min(g.min_dim());
        let full = thin_svd(&g, g.min_dim()).unwrap();
        let cut = thin_svd(&g, k).unwrap();
        prop_assert!(cut.rank() <= k);
        for i in 0..cut.rank() {
            prop_assert_eq!(cut.sigma()[i], full.sigma()[i]);
        }
    }

    #[test]
    fn newton_schulz_tracks_scalar_map_on_diagonals(diag in prop::collection::vec(0.01f64..1.7, 1..6), iters in 0usize..8) {
        let out = newton_schulz_orthogonalize(&Matrix::from_diag(&diag), iters).unwrap();
        for (i, &s0) in diag.iter().enumerate() {
            let s = (0..iters).fold(s0, |s, _| 1.5 * s - 0.5 * s * s * s);
            prop_assert!((out.get(i, i) - s).abs() <= 1e-12);
        }
    }

    #[test]
    fn newton_schulz_preserves_singular_vectors(g in matrix(5)) {
        let n = frobenius_norm(&g);
        prop_assume!(n > 1e-6);
        let x = g.map(|v| v / n);
        let out = newton_schulz_orthogonalize(&x, 3).unwrap();
        let f = thin_svd(&x, x.min_dim()).unwrap();
        for i in 0..f.rank() {
            let s = f.sigma()[i];
            let expected = (0..3).fold(s, |s, _| 1.5 * s - 0.5 * s * s * s);
            prop_assert!((out.bilinear(f.u(i), f.v(i)).unwrap() - expected).abs() <= 1e-9);
        }
    }

    #[test]
    fn frobenius_norm_matches_inner_product(g in matrix(6)) {
        let n = frobenius_norm(&g);
        prop_assert!((n * n - frobenius_inner(&g, &g).unwrap()).abs() <= 1e-12 * (n * n).max(1.0));
    }
}

#[test]
fn rank_two_matrix_has_negligible_third_value() {
    let a = Matrix::from_rows(&[&[1.0, 2.0], &[0.5, -1.0], &[3.0, 0.0], &[-2.0, 1.0], &[0.0, 4.0]]).unwrap();
    let b = Matrix::from_rows(&[&[1.0, 0.0, 2.0], &[-1.0, 3.0, 0.5]]).unwrap();
    let g = a.matmul(&b).unwrap();
    let f = thin_svd(&g, 3).unwrap();
    let third = f.sigma().get(2).copied().unwrap_or(0.0);
    assert!(third <= 1e-10 * f.sigma()[0]);
    let ev = sym_eigenvalues(&g.t_matmul(&g).unwrap());
    for i in 0..2 {
        assert!((f.sigma()[i] - ev[i].sqrt()).abs() <= 1e-10 * f.sigma()[0]);
    }
}
