use kpfcp_core::kron::{kron_expand, stacked_regressors, KronDims};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Dense (K x P·K1) matrix [g2,1 ⊗ I, ..., g2,P ⊗ I].
fn dense_g2_bar(g2: &[Complex64], d: KronDims) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(d.k(), d.len1());
    for p in 0..d.p {
        for k2 in 0..d.k2 {
            for k1 in 0..d.k1 {
                m[(k2 * d.k1 + k1, p * d.k1 + k1)] = g2[p * d.k2 + k2];
            }
        }
    }
    m
}

/// Dense (K x P·K2) matrix [I ⊗ g1,1, ..., I ⊗ g1,P].
fn dense_g1_bar(g1: &[Complex64], d: KronDims) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(d.k(), d.len2());
    for p in 0..d.p {
        for k2 in 0..d.k2 {
            for k1 in 0..d.k1 {
                m[(k2 * d.k1 + k1, p * d.k2 + k2)] = g1[p * d.k1 + k1];
            }
        }
    }
    m
}

#[test]
fn svd_factors_rebuild_filter() {
    let d = KronDims { p: 2, k1: 3, k2: 2 };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let g = rand_vec(&mut rng, d.k());
        // Column-major K1 x K2 reshape: M[k1, k2] = g[k2·K1 + k1].
        let m = DMatrix::from_column_slice(d.k1, d.k2, &g);
        let svd = m.svd(true, true);
        let u = svd.u.unwrap();
        let v_t = svd.v_t.unwrap();
        let mut g1 = Vec::new();
        let mut g2 = Vec::new();
        for p in 0..d.p {
            g1.extend(u.column(p).iter().copied());
            // M = Σ σ u vᴴ and vec(u wᵀ) = w ⊗ u, so w = σ·conj(v) = σ·row of Vᴴ.
            g2.extend(v_t.row(p).iter().map(|c| c * svd.singular_values[p]));
        }
        let back = kron_expand(&g1, &g2, d).unwrap();
        for (a, b) in back.iter().zip(&g) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn truncated_svd_is_best_rank_one() {
    // P = 1 keeps the leading singular pair; the residual equals the
    // second singular value in Frobenius norm.
    let d = KronDims { p: 1, k1: 3, k2: 2 };
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let g = rand_vec(&mut rng, d.k());
    let m = DMatrix::from_column_slice(d.k1, d.k2, &g);
    let svd = m.clone().svd(true, true);
    let g1: Vec<_> = svd.u.as_ref().unwrap().column(0).iter().copied().collect();
    let g2: Vec<_> = svd.v_t.as_ref().unwrap().row(0).iter().map(|c| c * svd.singular_values[0]).collect();
    let back = kron_expand(&g1, &g2, d).unwrap();
    let resid: f64 = back.iter().zip(&g).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    assert!((resid - svd.singular_values[1]).abs() < 1e-10);
}

#[test]
fn efficient_regressors_match_dense_construction() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (p, k1, k2) in [(1, 1, 1), (2, 3, 2), (3, 9, 9), (5, 9, 9), (2, 4, 7)] {
        let d = KronDims { p, k1, k2 };
        let g1 = rand_vec(&mut rng, d.len1());
        let g2 = rand_vec(&mut rng, d.len2());
        let h = rand_vec(&mut rng, d.k());
        let (s2, s1) = stacked_regressors(&h, &g1, &g2, d).unwrap();
        let hv = DMatrix::from_column_slice(d.k(), 1, &h);
        let dense_s2 = dense_g2_bar(&g2, d).adjoint() * &hv;
        let dense_s1 = dense_g1_bar(&g1, d).adjoint() * &hv;
        for (a, b) in s2.iter().zip(dense_s2.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        for (a, b) in s1.iter().zip(dense_s1.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        // The full filter is Ḡ2 g1 = Ḡ1 g2.
        let g = kron_expand(&g1, &g2, d).unwrap();
        let via2 = dense_g2_bar(&g2, d) * DMatrix::from_column_slice(d.len1(), 1, &g1);
        let via1 = dense_g1_bar(&g1, d) * DMatrix::from_column_slice(d.len2(), 1, &g2);
        for ((a, b), c) in g.iter().zip(via2.iter()).zip(via1.iter()) {
            assert!((a - b).norm() < 1e-12 && (a - c).norm() < 1e-12);
        }
    }
}

#[test]
fn three_inner_products_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for i in 0..1000 {
        let p = 1 + i % 5;
        let d = KronDims {
            p,
            k1: p.max(1 + (i / 5) % 9),
            k2: p.max(1 + (i / 45) % 9),
        };
        let g1 = rand_vec(&mut rng, d.len1());
        let g2 = rand_vec(&mut rng, d.len2());
        let h = rand_vec(&mut rng, d.k());
        let (s2, s1) = stacked_regressors(&h, &g1, &g2, d).unwrap();
        let g = kron_expand(&g1, &g2, d).unwrap();
        let full = dot_conj(&g, &h);
        assert!((dot_conj(&g1, &s2) - full).norm() < 1e-10);
        assert!((dot_conj(&g2, &s1) - full).norm() < 1e-10);
    }
}
