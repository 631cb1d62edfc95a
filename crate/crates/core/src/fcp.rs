//! Full-length forward convolutive prediction, updated frame by frame with
//! weighted RLS. One independent K-tap filter per frequency bin.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::complexity::{MacCounter, NoCount, COMPLEX_MAC};
use crate::dereverb::{self, BinPredictor, ProcessOptions};
use crate::error::{Error, Result};
use crate::lambda::DEFAULT_LAMBDA_FLOOR;
use crate::rls::{dot_conj, push_history, InverseCorrelation};
use crate::stft::TFGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcpParams {
    pub k: usize,
    pub alpha: f64,
    pub sigma: f64,
    #[serde(default = "default_floor")]
    pub lambda_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_LAMBDA_FLOOR
}

impl Default for FcpParams {
    fn default() -> Self {
        Self {
            k: 81,
            alpha: 0.95,
            sigma: 0.01,
            lambda_floor: DEFAULT_LAMBDA_FLOOR,
        }
    }
}

impl FcpParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("fcp.k must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!("fcp.alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("fcp.sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.lambda_floor > 0.0 && self.lambda_floor.is_finite()) {
            return Err(Error::InvalidConfig("fcp.lambda_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Adaptive state of one frequency bin.
#[derive(Debug, Clone)]
pub struct FcpBinState {
    g: Vec<Complex64>,
    inv_corr: InverseCorrelation,
    history: Vec<Complex64>,
    alpha: f64,
    bin: usize,
    frame: usize,
}

impl FcpBinState {
    /// Identity prediction g = e1 with an identity inverse correlation.
    pub fn new(params: &FcpParams, bin: usize) -> Self {
        let mut g = vec![Complex64::default(); params.k];
        g[0] = Complex64::new(1.0, 0.0);
        Self::with_filter(params, bin, g)
    }

    pub fn with_filter(params: &FcpParams, bin: usize, g: Vec<Complex64>) -> Self {
        assert_eq!(g.len(), params.k, "filter length must equal k");
        Self {
            inv_corr: InverseCorrelation::identity(params.k),
            history: vec![Complex64::default(); params.k],
            g,
            alpha: params.alpha,
            bin,
            frame: 0,
        }
    }

    pub fn filter(&self) -> &[Complex64] {
        &self.g
    }

    pub fn inverse_correlation(&self) -> &InverseCorrelation {
        &self.inv_corr
    }

    pub fn history(&self) -> &[Complex64] {
        &self.history
    }

    pub fn frames_processed(&self) -> usize {
        self.frame
    }
}

impl BinPredictor for FcpBinState {
    const NAME: &'static str = "fcp";

    fn step_counted<C: MacCounter>(
        &mut self,
        y: Complex64,
        s_nn: Complex64,
        lambda: f64,
        counter: &mut C,
    ) -> Result<Complex64> {
        let k = self.g.len() as u64;
        push_history(&mut self.history, s_nn);
        let err = y - dot_conj(&self.g, &self.history);
        counter.add(COMPLEX_MAC * k);
        let diverged = Error::NonFinite {
            algorithm: Self::NAME,
            frame: self.frame,
            bin: self.bin,
        };
        self.inv_corr
            .update(&mut self.g, &self.history, err, self.alpha, lambda, counter)
            .map_err(|_| diverged)?;
        let s_hat = s_nn + y - dot_conj(&self.g, &self.history);
        counter.add(COMPLEX_MAC * k);
        self.frame += 1;
        if s_hat.re.is_finite() && s_hat.im.is_finite() {
            Ok(s_hat)
        } else {
            Err(Error::NonFinite {
                algorithm: Self::NAME,
                frame: self.frame - 1,
                bin: self.bin,
            })
        }
    }
}

/// One frame of one bin: a-priori error, RLS update, then the output from
/// the updated filter, Ŝ = Ŝ_nn + Y - gᴴŝ.
pub fn fcp_step(state: &mut FcpBinState, y: Complex64, s_nn: Complex64, lambda: f64) -> Result<Complex64> {
    state.step_counted(y, s_nn, lambda, &mut NoCount)
}

pub fn fcp_process(observed: &TFGrid, s_nn: &TFGrid, params: &FcpParams) -> Result<TFGrid> {
    params.validate()?;
    let out = dereverb::process_bins(
        observed,
        s_nn,
        params.sigma,
        params.lambda_floor,
        |bin| FcpBinState::new(params, bin),
        &ProcessOptions::default(),
    )?;
    Ok(out.grid)
}
