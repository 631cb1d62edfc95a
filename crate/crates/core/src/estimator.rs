//! Direct-path estimators feeding the linear prediction stage.
//!
//! Every estimator is causal: frame `t` of the estimate depends only on
//! frames `0..=t` of its inputs.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stft::TFGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Ground-truth direct path blended with frame-scaled Gaussian noise.
    #[default]
    Oracle,
    /// Passes the observation through unchanged.
    Identity,
    /// Estimate supplied by an outside system.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    #[serde(default)]
    pub degradation: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            kind: EstimatorKind::Oracle,
            degradation: 0.1,
            seed: 0,
        }
    }
}

impl EstimatorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.degradation.is_finite() && (0.0..=1.0).contains(&self.degradation)) {
            return Err(Error::InvalidConfig(format!(
                "estimator.degradation must lie in [0, 1], got {}",
                self.degradation
            )));
        }
        Ok(())
    }
}

/// Source of the direct-path estimate.
pub trait DirectPathEstimator {
    fn estimate(&self, observed: &TFGrid) -> Result<TFGrid>;
}

pub struct IdentityEstimator;

impl DirectPathEstimator for IdentityEstimator {
    fn estimate(&self, observed: &TFGrid) -> Result<TFGrid> {
        Ok(observed.clone())
    }
}

pub struct OracleEstimator<'a> {
    pub truth: &'a TFGrid,
    pub degradation: f64,
    pub seed: u64,
}

impl DirectPathEstimator for OracleEstimator<'_> {
    fn estimate(&self, observed: &TFGrid) -> Result<TFGrid> {
        observed.check_same_shape(self.truth, "oracle truth vs observed")?;
        let d = self.degradation;
        if d == 0.0 {
            return Ok(self.truth.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = self.truth.clone();
        let bins = out.num_bins();
        let mut noise = vec![Complex64::default(); bins];
        let std = std::f64::consts::FRAC_1_SQRT_2;
        for mut row in out.data.rows_mut() {
            for n in noise.iter_mut() {
                *n = Complex64::new(
                    std * rng.sample::<f64, _>(StandardNormal),
                    std * rng.sample::<f64, _>(StandardNormal),
                );
            }
            let target = rms(row.iter());
            let drawn = rms(noise.iter());
            let scale = if drawn > 0.0 { target / drawn } else { 0.0 };
            for (s, n) in row.iter_mut().zip(&noise) {
                *s = *s * (1.0 - d) + *n * (d * scale);
            }
        }
        Ok(out)
    }
}

/// Estimate read from elsewhere, e.g. the analysed output of a neural network.
pub struct ExternalEstimator {
    pub grid: TFGrid,
}

impl DirectPathEstimator for ExternalEstimator {
    fn estimate(&self, observed: &TFGrid) -> Result<TFGrid> {
        observed.check_same_shape(&self.grid, "external estimate vs observed")?;
        Ok(self.grid.clone())
    }
}

fn rms<'a>(values: impl Iterator<Item = &'a Complex64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), c| (s + c.norm_sqr(), n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Runs the oracle or identity estimator described by `spec`.
pub fn estimate(spec: &EstimatorSpec, observed: &TFGrid, direct_truth: Option<&TFGrid>) -> Result<TFGrid> {
    spec.validate()?;
    match spec.kind {
        EstimatorKind::Identity => IdentityEstimator.estimate(observed),
        EstimatorKind::Oracle => {
            let truth = direct_truth.ok_or_else(|| {
                Error::InvalidInput("oracle estimator requires the direct-path ground truth".into())
            })?;
            OracleEstimator {
                truth,
                degradation: spec.degradation,
                seed: spec.seed,
            }
            .estimate(observed)
        }
        EstimatorKind::External => Err(Error::InvalidInput(
            "external estimates are supplied through ExternalEstimator".into(),
        )),
    }
}
