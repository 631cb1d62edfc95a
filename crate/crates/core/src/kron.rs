//! Kronecker-structured filter algebra.
//!
//! A length-K filter g (K = K1·K2) is represented by P pairs of short
//! filters, g = Σ_p g2,p ⊗ g1,p, so g[k2·K1 + k1] = Σ_p g2,p[k2]·g1,p[k1].
//! Viewing the length-K history as the K1 x K2 matrix S[k1, k2] =
//! h[k2·K1 + k1], the stacked regressors are
//!
//! * block p of s2 = S · conj(g2,p), length K1, so that g1ᴴ s2 = gᴴ h;
//! * block p of s1 = Sᵀ · conj(g1,p), length K2, so that g2ᴴ s1 = gᴴ h.
//!
//! Neither the length-K filter nor the K x PK1 expansion matrices are ever
//! formed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::complexity::{MacCounter, COMPLEX_MAC};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KronDims {
    pub p: usize,
    pub k1: usize,
    pub k2: usize,
}

impl KronDims {
    pub fn k(&self) -> usize {
        self.k1 * self.k2
    }

    pub fn len1(&self) -> usize {
        self.p * self.k1
    }

    pub fn len2(&self) -> usize {
        self.p * self.k2
    }

    fn check(&self, g1: &[Complex64], g2: &[Complex64]) -> Result<()> {
        if g1.len() != self.len1() || g2.len() != self.len2() {
            return Err(Error::ShapeMismatch(format!(
                "expected stacked filters of length {} and {}, got {} and {}",
                self.len1(),
                self.len2(),
                g1.len(),
                g2.len()
            )));
        }
        Ok(())
    }
}

/// Materializes g = Σ_p g2,p ⊗ g1,p.
pub fn kron_expand(g1: &[Complex64], g2: &[Complex64], dims: KronDims) -> Result<Vec<Complex64>> {
    dims.check(g1, g2)?;
    let (k1, k2) = (dims.k1, dims.k2);
    let mut g = vec![Complex64::default(); dims.k()];
    for p in 0..dims.p {
        let a = &g1[p * k1..(p + 1) * k1];
        let b = &g2[p * k2..(p + 1) * k2];
        for (j, bj) in b.iter().enumerate() {
            for (i, ai) in a.iter().enumerate() {
                g[j * k1 + i] += bj * ai;
            }
        }
    }
    Ok(g)
}

/// Block p of s2 = S · conj(g2,p).
pub(crate) fn regressor_s2<C: MacCounter>(
    history: &[Complex64],
    g2: &[Complex64],
    dims: KronDims,
    out: &mut [Complex64],
    counter: &mut C,
) {
    let (k1, k2) = (dims.k1, dims.k2);
    out.iter_mut().for_each(|v| *v = Complex64::default());
    for p in 0..dims.p {
        let block = &mut out[p * k1..(p + 1) * k1];
        for (j, g) in g2[p * k2..(p + 1) * k2].iter().enumerate() {
            let c = g.conj();
            let column = &history[j * k1..(j + 1) * k1];
            for (o, h) in block.iter_mut().zip(column) {
                *o += c * h;
            }
        }
    }
    counter.add(COMPLEX_MAC * (dims.p * dims.k()) as u64);
}

/// Block p of s1 = Sᵀ · conj(g1,p).
pub(crate) fn regressor_s1<C: MacCounter>(
    history: &[Complex64],
    g1: &[Complex64],
    dims: KronDims,
    out: &mut [Complex64],
    counter: &mut C,
) {
    let (k1, k2) = (dims.k1, dims.k2);
    for p in 0..dims.p {
        let a = &g1[p * k1..(p + 1) * k1];
        for j in 0..k2 {
            out[p * k2 + j] = crate::rls::dot_conj(a, &history[j * k1..(j + 1) * k1]);
        }
    }
    counter.add(COMPLEX_MAC * (dims.p * dims.k()) as u64);
}

/// Both stacked regressors (s2 of length P·K1, s1 of length P·K2).
pub fn stacked_regressors(
    history: &[Complex64],
    g1: &[Complex64],
    g2: &[Complex64],
    dims: KronDims,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    dims.check(g1, g2)?;
    if history.len() != dims.k() {
        return Err(Error::ShapeMismatch(format!(
            "history length {} != K = {}",
            history.len(),
            dims.k()
        )));
    }
    let mut s2 = vec![Complex64::default(); dims.len1()];
    let mut s1 = vec![Complex64::default(); dims.len2()];
    let mut none = crate::complexity::NoCount;
    regressor_s2(history, g2, dims, &mut s2, &mut none);
    regressor_s1(history, g1, dims, &mut s1, &mut none);
    Ok((s2, s1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1(n: usize) -> Vec<Complex64> {
        let mut v = vec![Complex64::default(); n];
        v[0] = Complex64::new(1.0, 0.0);
        v
    }

    #[test]
    fn unit_kronecker() {
        let dims = KronDims { p: 1, k1: 3, k2: 4 };
        assert_eq!(kron_expand(&e1(3), &e1(4), dims).unwrap(), e1(12));
    }

    #[test]
    fn scalar_kronecker() {
        let dims = KronDims { p: 1, k1: 1, k2: 1 };
        let a = Complex64::new(1.5, -2.0);
        let b = Complex64::new(0.5, 3.0);
        assert_eq!(kron_expand(&[a], &[b], dims).unwrap(), vec![a * b]);
    }

    #[test]
    fn layout_is_g2_outer() {
        let dims = KronDims { p: 1, k1: 2, k2: 3 };
        let g1: Vec<_> = [1.0, 10.0].iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let g2: Vec<_> = [1.0, 2.0, 3.0].iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let g = kron_expand(&g1, &g2, dims).unwrap();
        let re: Vec<f64> = g.iter().map(|c| c.re).collect();
        assert_eq!(re, vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0]);
    }

    #[test]
    fn single_tap_history() {
        let dims = KronDims { p: 2, k1: 3, k2: 2 };
        let g1: Vec<_> = (0..6).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let g2: Vec<_> = (0..4).map(|i| Complex64::new(1.0, i as f64)).collect();
        let (s2, _) = stacked_regressors(&e1(6), &g1, &g2, dims).unwrap();
        for p in 0..2 {
            let expect = g2[p * 2].conj();
            assert_eq!(s2[p * 3], expect);
            assert_eq!(s2[p * 3 + 1], Complex64::default());
            assert_eq!(s2[p * 3 + 2], Complex64::default());
        }
    }

    #[test]
    fn shape_errors() {
        let dims = KronDims { p: 2, k1: 3, k2: 2 };
        assert!(kron_expand(&e1(5), &e1(4), dims).is_err());
        assert!(stacked_regressors(&e1(5), &e1(6), &e1(4), dims).is_err());
    }
}
