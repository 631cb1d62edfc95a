//! Forward convolutive prediction with a Kronecker-factored filter.
//!
//! Each bin carries two stacked short filters, g1 (P blocks of K1 taps)
//! and g2 (P blocks of K2 taps), whose Kronecker sum stands in for the
//! K = K1·K2 tap prediction filter. Every frame runs two interleaved RLS
//! updates: g1 against the regressor built from the previous g2, then g2
//! against the regressor built from the freshly updated g1. Per-frame cost
//! is O(P²(K1² + K2²)) instead of O(K²).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::complexity::{MacCounter, NoCount, COMPLEX_MAC};
use crate::dereverb::{self, BinPredictor, ProcessOptions};
use crate::error::{Error, Result};
use crate::kron::{kron_expand, regressor_s1, regressor_s2, KronDims};
use crate::lambda::DEFAULT_LAMBDA_FLOOR;
use crate::rls::{dot_conj, push_history, InverseCorrelation};
use crate::stft::TFGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpfcpParams {
    pub k1: usize,
    pub k2: usize,
    pub p: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub sigma: f64,
    #[serde(default = "default_floor")]
    pub lambda_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_LAMBDA_FLOOR
}

impl Default for KpfcpParams {
    fn default() -> Self {
        Self {
            k1: 9,
            k2: 9,
            p: 3,
            alpha1: 0.95,
            alpha2: 0.95,
            sigma: 0.01,
            lambda_floor: DEFAULT_LAMBDA_FLOOR,
        }
    }
}

impl KpfcpParams {
    pub fn dims(&self) -> KronDims {
        KronDims {
            p: self.p,
            k1: self.k1,
            k2: self.k2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k1 == 0 || self.k2 == 0 || self.p == 0 {
            return Err(Error::InvalidConfig(format!(
                "kpfcp.k1, kpfcp.k2 and kpfcp.p must be at least 1, got ({}, {}, {})",
                self.k1, self.k2, self.p
            )));
        }
        if self.p > self.k1.min(self.k2) {
            return Err(Error::InvalidConfig(format!(
                "kpfcp.p = {} violates P <= min(K1, K2) = {}",
                self.p,
                self.k1.min(self.k2)
            )));
        }
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidConfig(format!("kpfcp.{name} must lie in (0, 1], got {a}")));
            }
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("kpfcp.sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.lambda_floor > 0.0 && self.lambda_floor.is_finite()) {
            return Err(Error::InvalidConfig("kpfcp.lambda_floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KpfcpBinState {
    dims: KronDims,
    alpha1: f64,
    alpha2: f64,
    g1: Vec<Complex64>,
    g2: Vec<Complex64>,
    inv_corr2: InverseCorrelation,
    inv_corr1: InverseCorrelation,
    history: Vec<Complex64>,
    s2: Vec<Complex64>,
    s1: Vec<Complex64>,
    bin: usize,
    frame: usize,
}

impl KpfcpBinState {
    /// Starts from identity prediction, g = g2,1 ⊗ g1,1 = e1. The remaining
    /// g1 blocks start on distinct unit vectors (g1,p = e_p) with their g2
    /// partners at zero, so the sum is still e1 but no block is stuck at the
    /// zero fixed point.
    pub fn new(params: &KpfcpParams, bin: usize) -> Self {
        let dims = params.dims();
        let mut g1 = vec![Complex64::default(); dims.len1()];
        let mut g2 = vec![Complex64::default(); dims.len2()];
        for p in 0..dims.p {
            g1[p * dims.k1 + p] = Complex64::new(1.0, 0.0);
        }
        g2[0] = Complex64::new(1.0, 0.0);
        Self::build(params, bin, g1, g2)
    }

    /// Custom initial filters; both all-zero is rejected because neither
    /// filter can ever leave that point.
    pub fn with_filters(
        params: &KpfcpParams,
        bin: usize,
        g1: Vec<Complex64>,
        g2: Vec<Complex64>,
    ) -> Result<Self> {
        let dims = params.dims();
        if g1.len() != dims.len1() || g2.len() != dims.len2() {
            return Err(Error::ShapeMismatch(format!(
                "initial filters must have lengths {} and {}",
                dims.len1(),
                dims.len2()
            )));
        }
        let zero = Complex64::default();
        if g1.iter().all(|c| *c == zero) && g2.iter().all(|c| *c == zero) {
            return Err(Error::InvalidConfig(
                "all-zero initial filters are a fixed point of the updates".into(),
            ));
        }
        Ok(Self::build(params, bin, g1, g2))
    }

    fn build(params: &KpfcpParams, bin: usize, g1: Vec<Complex64>, g2: Vec<Complex64>) -> Self {
        let dims = params.dims();
        Self {
            dims,
            alpha1: params.alpha1,
            alpha2: params.alpha2,
            g1,
            g2,
            inv_corr2: InverseCorrelation::identity(dims.len1()),
            inv_corr1: InverseCorrelation::identity(dims.len2()),
            history: vec![Complex64::default(); dims.k()],
            s2: vec![Complex64::default(); dims.len1()],
            s1: vec![Complex64::default(); dims.len2()],
            bin,
            frame: 0,
        }
    }

    pub fn g1(&self) -> &[Complex64] {
        &self.g1
    }

    pub fn g2(&self) -> &[Complex64] {
        &self.g2
    }

    pub fn dims(&self) -> KronDims {
        self.dims
    }

    /// Inverse correlation of the length-PK1 regressor (drives g1).
    pub fn inv_corr2(&self) -> &InverseCorrelation {
        &self.inv_corr2
    }

    /// Inverse correlation of the length-PK2 regressor (drives g2).
    pub fn inv_corr1(&self) -> &InverseCorrelation {
        &self.inv_corr1
    }

    pub fn history(&self) -> &[Complex64] {
        &self.history
    }

    /// Regressors used in the most recent step: (s2 from the prior g2,
    /// s1 from the updated g1).
    pub fn last_regressors(&self) -> (&[Complex64], &[Complex64]) {
        (&self.s2, &self.s1)
    }

    /// Equivalent length-K filter.
    pub fn full_filter(&self) -> Vec<Complex64> {
        kron_expand(&self.g1, &self.g2, self.dims).expect("state shapes are consistent")
    }

    fn diverged(&self) -> Error {
        Error::NonFinite {
            algorithm: Self::NAME,
            frame: self.frame,
            bin: self.bin,
        }
    }

    fn update_g1<C: MacCounter>(&mut self, y: Complex64, lambda: f64, counter: &mut C) -> Result<()> {
        regressor_s2(&self.history, &self.g2, self.dims, &mut self.s2, counter);
        let e1 = y - dot_conj(&self.g1, &self.s2);
        counter.add(COMPLEX_MAC * self.g1.len() as u64);
        self.inv_corr2
            .update(&mut self.g1, &self.s2, e1, self.alpha1, lambda, counter)
            .map(|_| ())
            .map_err(|_| self.diverged())
    }

    fn update_g2<C: MacCounter>(&mut self, y: Complex64, lambda: f64, counter: &mut C) -> Result<()> {
        regressor_s1(&self.history, &self.g1, self.dims, &mut self.s1, counter);
        let e2 = y - dot_conj(&self.g2, &self.s1);
        counter.add(COMPLEX_MAC * self.g2.len() as u64);
        self.inv_corr1
            .update(&mut self.g2, &self.s1, e2, self.alpha2, lambda, counter)
            .map(|_| ())
            .map_err(|_| self.diverged())
    }
}

impl BinPredictor for KpfcpBinState {
    const NAME: &'static str = "kpfcp";

    fn step_counted<C: MacCounter>(
        &mut self,
        y: Complex64,
        s_nn: Complex64,
        lambda: f64,
        counter: &mut C,
    ) -> Result<Complex64> {
        push_history(&mut self.history, s_nn);
        self.update_g1(y, lambda, counter)?;
        self.update_g2(y, lambda, counter)?;
        let s_hat = s_nn + y - dot_conj(&self.g2, &self.s1);
        counter.add(COMPLEX_MAC * self.g2.len() as u64);
        if !(s_hat.re.is_finite() && s_hat.im.is_finite()) {
            return Err(self.diverged());
        }
        self.frame += 1;
        Ok(s_hat)
    }
}

/// One frame of one bin; output Ŝ = Ŝ_nn + Y - g2ᴴ s1 with both filters updated.
pub fn kpfcp_step(state: &mut KpfcpBinState, y: Complex64, s_nn: Complex64, lambda: f64) -> Result<Complex64> {
    state.step_counted(y, s_nn, lambda, &mut NoCount)
}

pub fn kpfcp_process(observed: &TFGrid, s_nn: &TFGrid, params: &KpfcpParams) -> Result<TFGrid> {
    params.validate()?;
    let out = dereverb::process_bins(
        observed,
        s_nn,
        params.sigma,
        params.lambda_floor,
        |bin| KpfcpBinState::new(params, bin),
        &ProcessOptions::default(),
    )?;
    Ok(out.grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fcp::{fcp_step, FcpBinState, FcpParams};
    use crate::lambda::LambdaTracker;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_c(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    fn params(p: usize, k1: usize, k2: usize) -> KpfcpParams {
        KpfcpParams {
            p,
            k1,
            k2,
            ..Default::default()
        }
    }

    #[test]
    fn initial_filter_is_identity_prediction() {
        let st = KpfcpBinState::new(&params(3, 9, 9), 0);
        let g = st.full_filter();
        assert_eq!(g[0], Complex64::new(1.0, 0.0));
        assert!(g[1..].iter().all(|c| *c == Complex64::default()));
    }

    #[test]
    fn zero_g2_only_moves_g2() {
        // With g2 = 0 the regressor s2 vanishes, so g1 cannot move in the
        // first frame; g2 then adapts on s1 built from g1.
        let prm = params(2, 3, 2);
        let g1: Vec<_> = (0..6).map(|i| Complex64::new(0.1 * i as f64 + 0.1, 0.2)).collect();
        let g2 = vec![Complex64::default(); 4];
        let mut st = KpfcpBinState::with_filters(&prm, 0, g1.clone(), g2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = rand_c(&mut rng);
        kpfcp_step(&mut st, rand_c(&mut rng), s, 1.0).unwrap();
        assert!(st.last_regressors().0.iter().all(|c| *c == Complex64::default()));
        assert_eq!(st.g1(), &g1[..]);
        assert!(st.g2().iter().any(|c| c.norm() > 0.0));
    }

    #[test]
    fn zero_g1_with_silent_target_freezes_g2() {
        // g1 = 0 and y = 0: e1 = 0 keeps g1 at zero, s1 = 0, g2 unchanged.
        let prm = params(2, 3, 2);
        let g1 = vec![Complex64::default(); 6];
        let g2: Vec<_> = (0..4).map(|i| Complex64::new(1.0, i as f64)).collect();
        let mut st = KpfcpBinState::with_filters(&prm, 0, g1, g2.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            kpfcp_step(&mut st, Complex64::default(), rand_c(&mut rng), 1.0).unwrap();
            assert!(st.last_regressors().1.iter().all(|c| *c == Complex64::default()));
            assert_eq!(st.g2(), &g2[..]);
        }
    }

    #[test]
    fn all_zero_init_rejected() {
        let prm = params(2, 3, 2);
        let err = KpfcpBinState::with_filters(&prm, 0, vec![Complex64::default(); 6], vec![Complex64::default(); 4]);
        assert!(err.is_err());
    }

    #[test]
    fn scalar_g1_half_tracks_fcp() {
        // With P = K1 = K2 = 1 and g2 pinned at one, the g1 recursion is the
        // single-tap FCP recursion.
        let kp = KpfcpParams {
            p: 1,
            k1: 1,
            k2: 1,
            alpha1: 0.97,
            alpha2: 0.97,
            ..Default::default()
        };
        let fp = FcpParams {
            k: 1,
            alpha: 0.97,
            ..Default::default()
        };
        let mut a = KpfcpBinState::new(&kp, 0);
        let mut b = FcpBinState::new(&fp, 0);
        let mut tracker = LambdaTracker::new(0.01, 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let s = rand_c(&mut rng);
            let y = s * Complex64::new(1.2, 0.3) + rand_c(&mut rng) * 0.2;
            let lam = tracker.update(y);
            push_history(&mut a.history, s);
            a.update_g1(y, lam, &mut NoCount).unwrap();
            fcp_step(&mut b, y, s, lam).unwrap();
            assert!((a.g1[0] - b.filter()[0]).norm() < 1e-10);
            assert_eq!(a.g2[0], Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn scalar_full_step_by_hand() {
        // s = 1, y = 2, λ = 1, α = 1 from g1 = g2 = 1, Φ = 1:
        // g1 → 1.5, s1 = 1.5, e2 = 0.5, κ1 = 1.5 / 3.25, g2 → 1 + 0.75 / 3.25.
        // Single-tap FCP lands on g = 1.5 and outputs 1.5 instead.
        let kp = KpfcpParams {
            p: 1,
            k1: 1,
            k2: 1,
            alpha1: 1.0,
            alpha2: 1.0,
            ..Default::default()
        };
        let mut st = KpfcpBinState::new(&kp, 0);
        let one = Complex64::new(1.0, 0.0);
        let out = kpfcp_step(&mut st, one * 2.0, one, 1.0).unwrap();
        let g2 = 1.0 + 0.75 / 3.25;
        assert!((st.g1()[0].re - 1.5).abs() < 1e-15);
        assert!((st.g2()[0].re - g2).abs() < 1e-15);
        assert!((out.re - (3.0 - 1.5 * g2)).abs() < 1e-14);
        assert!((out.re - 1.5).abs() > 0.3);
    }

    #[test]
    fn frozen_g2_solves_normal_equations() {
        // Only the g1 half runs; with α1 = 1 and λ = 1 the recursion equals
        // (I + Σ s2 s2ᴴ) g1 = g1(0) + Σ s2 y*.
        let prm = KpfcpParams {
            alpha1: 1.0,
            ..params(2, 3, 2)
        };
        let mut st = KpfcpBinState::new(&prm, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for v in st.g2.iter_mut() {
            *v = rand_c(&mut rng);
        }
        let n = prm.dims().len1();
        let mut gram = DMatrix::<Complex64>::identity(n, n);
        let mut rhs = DVector::from_vec(st.g1().to_vec());
        for _ in 0..60 {
            let s = rand_c(&mut rng);
            let y = rand_c(&mut rng);
            push_history(&mut st.history, s);
            st.update_g1(y, 1.0, &mut NoCount).unwrap();
            let x = DVector::from_vec(st.s2.clone());
            gram += &x * x.adjoint();
            rhs += &x * y.conj();
        }
        let g = gram.lu().solve(&rhs).unwrap();
        for i in 0..n {
            assert!((st.g1()[i] - g[i]).norm() < 1e-8);
        }
    }

    #[test]
    fn efficient_output_matches_full_filter() {
        let prm = params(3, 4, 3);
        let mut st = KpfcpBinState::new(&prm, 0);
        let mut tracker = LambdaTracker::new(0.01, 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..400 {
            let s = rand_c(&mut rng);
            let y = s + rand_c(&mut rng) * 0.5;
            let lam = tracker.update(y);
            let out = kpfcp_step(&mut st, y, s, lam).unwrap();
            let g = st.full_filter();
            let direct = s + y - dot_conj(&g, st.history());
            assert!((out - direct).norm() < 1e-10);
        }
    }

    #[test]
    fn higher_order_blocks_adapt() {
        let prm = params(3, 3, 3);
        let mut st = KpfcpBinState::new(&prm, 0);
        let mut tracker = LambdaTracker::new(0.01, 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut hist = vec![Complex64::default(); 9];
        let h: Vec<Complex64> = (0..9).map(|_| rand_c(&mut rng) * 0.3).collect();
        for _ in 0..300 {
            let s = rand_c(&mut rng);
            push_history(&mut hist, s);
            let y = s + dot_conj(&h, &hist);
            let lam = tracker.update(y);
            kpfcp_step(&mut st, y, s, lam).unwrap();
        }
        for p in 1..3 {
            assert!(st.g2()[p * 3..(p + 1) * 3].iter().any(|c| c.norm() > 1e-3));
        }
    }

    #[test]
    fn inverse_correlations_stay_hermitian() {
        let prm = params(3, 9, 9);
        let mut st = KpfcpBinState::new(&prm, 0);
        let mut tracker = LambdaTracker::new(0.01, 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3000 {
            let s = rand_c(&mut rng);
            let y = s * 1.3 + rand_c(&mut rng) * 0.1;
            let lam = tracker.update(y);
            kpfcp_step(&mut st, y, s, lam).unwrap();
        }
        assert!(st.inv_corr1().hermitian_defect() < 1e-8);
        assert!(st.inv_corr2().hermitian_defect() < 1e-8);
    }

    #[test]
    fn parameter_validation() {
        assert!(params(10, 9, 9).validate().is_err());
        assert!(params(0, 9, 9).validate().is_err());
        assert!(params(5, 9, 9).validate().is_ok());
        let bad = KpfcpParams {
            alpha2: 1.2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let msg = params(6, 9, 5).validate().unwrap_err().to_string();
        assert!(msg.contains("min(K1, K2)"));
    }
}
