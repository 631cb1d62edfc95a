//! Exponentially weighted complex RLS kernel shared by both predictors.

use num_complex::Complex64;

use crate::complexity::{MacCounter, COMPLEX_MAC, REAL_SCALE};

/// Marker for a numerically broken update; callers attach frame/bin context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Diverged;

/// Σ conj(a_i) b_i
#[inline]
pub(crate) fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Complex64::new(re, im)
}

/// Inverse of the weighted regressor correlation matrix, row-major n x n.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseCorrelation {
    n: usize,
    data: Vec<Complex64>,
    gain: Vec<Complex64>,
}

impl InverseCorrelation {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![Complex64::default(); n * n];
        for i in 0..n {
            data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        Self {
            n,
            data,
            gain: vec![Complex64::default(); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Largest |A_ij - conj(A_ji)|.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// One weighted RLS step for cost Σ α^(t-τ) |y - wᴴx|² / λ.
    ///
    /// `error` is the a-priori error y - wᴴx. Updates `weights` in place and
    /// returns the gain vector.
    pub(crate) fn update<C: MacCounter>(
        &mut self,
        weights: &mut [Complex64],
        x: &[Complex64],
        error: Complex64,
        alpha: f64,
        lambda: f64,
        counter: &mut C,
    ) -> Result<&[Complex64], Diverged> {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(weights.len(), n);

        // u = Φ⁻¹ x
        for (i, u) in self.gain.iter_mut().enumerate() {
            let row = &self.data[i * n..(i + 1) * n];
            let (mut re, mut im) = (0.0, 0.0);
            for (a, b) in row.iter().zip(x) {
                re += a.re * b.re - a.im * b.im;
                im += a.re * b.im + a.im * b.re;
            }
            *u = Complex64::new(re, im);
        }
        counter.add(COMPLEX_MAC * (n * n) as u64);

        let quad = dot_conj(x, &self.gain).re;
        counter.add(COMPLEX_MAC * n as u64);
        let denom = alpha * lambda + quad;
        if !(denom.is_finite() && denom > 0.0) {
            return Err(Diverged);
        }
        let inv_denom = 1.0 / denom;
        let inv_alpha = 1.0 / alpha;

        // Φ⁻¹ <- (Φ⁻¹ - κ uᴴ) / α with κ = u / denom, using xᴴΦ⁻¹ = uᴴ.
        for i in 0..n {
            let k = self.gain[i] * inv_denom;
            let row = &mut self.data[i * n..(i + 1) * n];
            for (a, u) in row.iter_mut().zip(&self.gain) {
                *a = (*a - k * u.conj()) * inv_alpha;
            }
        }
        counter.add((COMPLEX_MAC + REAL_SCALE) * (n * n) as u64);

        for i in 0..n {
            let d = &mut self.data[i * n + i];
            d.im = 0.0;
            for j in i + 1..n {
                let avg = (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5;
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
        counter.add(REAL_SCALE * (n * (n - 1) / 2) as u64);

        let ec = error.conj();
        for (k, w) in self.gain.iter_mut().zip(weights.iter_mut()) {
            *k *= inv_denom;
            *w += *k * ec;
        }
        counter.add((REAL_SCALE + COMPLEX_MAC) * n as u64);

        if weights.iter().all(|w| w.re.is_finite() && w.im.is_finite()) {
            Ok(&self.gain)
        } else {
            Err(Diverged)
        }
    }
}

/// Shifts `history` one slot towards older samples and inserts `newest` at index 0.
#[inline]
pub(crate) fn push_history(history: &mut [Complex64], newest: Complex64) {
    if history.is_empty() {
        return;
    }
    history.rotate_right(1);
    history[0] = newest;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexity::NoCount;

    #[test]
    fn scalar_step_matches_hand_computation() {
        // n = 1, Φ⁻¹ = 1, x = 2, y = 3, w = 0, α = 0.5, λ = 1.
        let mut p = InverseCorrelation::identity(1);
        let mut w = [Complex64::default()];
        let x = [Complex64::new(2.0, 0.0)];
        let e = Complex64::new(3.0, 0.0);
        p.update(&mut w, &x, e, 0.5, 1.0, &mut NoCount).unwrap();
        // κ = 2 / (0.5 + 4) ; w = κ·3 ; Φ⁻¹ = (1 - κ·2)/0.5
        let k = 2.0 / 4.5;
        assert!((w[0].re - 3.0 * k).abs() < 1e-15);
        assert!((p.get(0, 0).re - (1.0 - 2.0 * k) / 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_regressor_leaves_weights() {
        let mut p = InverseCorrelation::identity(3);
        let mut w = [Complex64::new(1.0, 2.0); 3];
        let x = [Complex64::default(); 3];
        p.update(&mut w, &x, Complex64::new(5.0, 1.0), 0.9, 1e-3, &mut NoCount).unwrap();
        assert_eq!(w, [Complex64::new(1.0, 2.0); 3]);
        assert!((p.get(0, 0).re - 1.0 / 0.9).abs() < 1e-15);
    }

    #[test]
    fn history_shift() {
        let mut h = [1.0, 2.0, 3.0].map(|v| Complex64::new(v, 0.0));
        push_history(&mut h, Complex64::new(9.0, 0.0));
        assert_eq!(h.map(|c| c.re), [9.0, 1.0, 2.0]);
    }
}
