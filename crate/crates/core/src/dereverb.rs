//! Running a per-bin predictor over a whole grid, in batch or frame by frame.
//!
//! The λ weights of a frame depend on every bin of that frame, so they are
//! computed in a frame-level pass first. After that the bins are fully
//! independent and may run on any number of threads without changing a bit
//! of the output.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::{MacCounter, MacTally, NoCount};
use crate::error::{Error, Result};
use crate::fcp::{FcpBinState, FcpParams};
use crate::kpfcp::{KpfcpBinState, KpfcpParams};
use crate::lambda::{lambda_grid, LambdaTracker};
use crate::stft::TFGrid;

/// A frame-online adaptive predictor for one frequency bin.
pub trait BinPredictor: Send {
    const NAME: &'static str;

    /// Consumes one TF unit and returns the dereverberated value.
    fn step_counted<C: MacCounter>(
        &mut self,
        y: Complex64,
        s_nn: Complex64,
        lambda: f64,
        counter: &mut C,
    ) -> Result<Complex64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessOptions {
    /// Spread bins across the rayon thread pool.
    pub parallel: bool,
    /// Count multiply-accumulates in the filter kernels.
    pub instrument_macs: bool,
}

impl Default for ProcessOptions {
    fn default() -> Self {
        Self {
            parallel: true,
            instrument_macs: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProcessOutput {
    pub grid: TFGrid,
    /// Present only when instrumentation was requested.
    pub macs: Option<MacTally>,
}

fn run_bin<P: BinPredictor>(
    mut state: P,
    y: &[Complex64],
    s_nn: &[Complex64],
    lambda: &[f64],
    instrument: bool,
) -> Result<(Vec<Complex64>, MacTally)> {
    let mut out = Vec::with_capacity(y.len());
    let mut tally = MacTally::default();
    for ((y, s), l) in y.iter().zip(s_nn).zip(lambda) {
        let v = if instrument {
            tally.tf_units += 1;
            state.step_counted(*y, *s, *l, &mut tally)?
        } else {
            state.step_counted(*y, *s, *l, &mut NoCount)?
        };
        out.push(v);
    }
    Ok((out, tally))
}

/// Runs one predictor per bin over all frames.
pub fn process_bins<P, F>(
    observed: &TFGrid,
    s_nn: &TFGrid,
    sigma: f64,
    lambda_floor: f64,
    make_state: F,
    opts: &ProcessOptions,
) -> Result<ProcessOutput>
where
    P: BinPredictor,
    F: Fn(usize) -> P + Sync,
{
    observed.check_same_shape(s_nn, "observed vs direct-path estimate")?;
    let lambda = lambda_grid(observed, sigma, lambda_floor);
    let bins = observed.num_bins();
    let work = |f: usize| {
        let y = observed.data.column(f).to_vec();
        let s = s_nn.data.column(f).to_vec();
        let l = lambda.column(f).to_vec();
        run_bin(make_state(f), &y, &s, &l, opts.instrument_macs)
    };
    let results: Vec<Result<(Vec<Complex64>, MacTally)>> = if opts.parallel {
        (0..bins).into_par_iter().map(work).collect()
    } else {
        (0..bins).map(work).collect()
    };
    let mut grid = observed.clone();
    let mut total = MacTally::default();
    for (f, r) in results.into_iter().enumerate() {
        let (col, tally) = r?;
        grid.data
            .column_mut(f)
            .iter_mut()
            .zip(col)
            .for_each(|(d, v)| *d = v);
        total.merge(&tally);
    }
    Ok(ProcessOutput {
        grid,
        macs: opts.instrument_macs.then_some(total),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Algorithm {
    Fcp(FcpParams),
    Kpfcp(KpfcpParams),
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Fcp(_) => FcpBinState::NAME,
            Algorithm::Kpfcp(_) => KpfcpBinState::NAME,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Algorithm::Fcp(p) => p.validate(),
            Algorithm::Kpfcp(p) => p.validate(),
        }
    }
}

pub fn dereverberate(
    algorithm: &Algorithm,
    observed: &TFGrid,
    s_nn: &TFGrid,
    opts: &ProcessOptions,
) -> Result<ProcessOutput> {
    algorithm.validate()?;
    match algorithm {
        Algorithm::Fcp(p) => process_bins(
            observed,
            s_nn,
            p.sigma,
            p.lambda_floor,
            |bin| FcpBinState::new(p, bin),
            opts,
        ),
        Algorithm::Kpfcp(p) => process_bins(
            observed,
            s_nn,
            p.sigma,
            p.lambda_floor,
            |bin| KpfcpBinState::new(p, bin),
            opts,
        ),
    }
}

/// Average instrumented MACs per TF unit of one run.
pub fn measure_macs(
    algorithm: &Algorithm,
    observed: &TFGrid,
    s_nn: &TFGrid,
    opts: &ProcessOptions,
) -> Result<f64> {
    if !opts.instrument_macs {
        return Err(Error::InstrumentationDisabled);
    }
    let out = dereverberate(algorithm, observed, s_nn, opts)?;
    out.macs
        .map(|m| m.per_tf_unit())
        .ok_or(Error::InstrumentationDisabled)
}

/// Frame-at-a-time driver for live use.
pub struct StreamingDereverberator<P> {
    states: Vec<P>,
    tracker: LambdaTracker,
    lambda: Vec<f64>,
}

impl<P: BinPredictor> StreamingDereverberator<P> {
    pub fn new(bins: usize, sigma: f64, lambda_floor: f64, make_state: impl Fn(usize) -> P) -> Self {
        Self {
            states: (0..bins).map(make_state).collect(),
            tracker: LambdaTracker::new(sigma, lambda_floor),
            lambda: vec![0.0; bins],
        }
    }

    pub fn process_frame(&mut self, y: &[Complex64], s_nn: &[Complex64]) -> Result<Vec<Complex64>> {
        if y.len() != self.states.len() || s_nn.len() != self.states.len() {
            return Err(Error::ShapeMismatch(format!(
                "frame has {} / {} bins, expected {}",
                y.len(),
                s_nn.len(),
                self.states.len()
            )));
        }
        self.tracker.frame_weights(y, &mut self.lambda);
        self.states
            .iter_mut()
            .zip(y.iter().zip(s_nn))
            .zip(&self.lambda)
            .map(|((st, (y, s)), l)| st.step_counted(*y, *s, *l, &mut NoCount))
            .collect()
    }
}

pub fn streaming(algorithm: &Algorithm, bins: usize) -> Result<StreamingAny> {
    algorithm.validate()?;
    Ok(match algorithm {
        Algorithm::Fcp(p) => StreamingAny::Fcp(StreamingDereverberator::new(
            bins,
            p.sigma,
            p.lambda_floor,
            |b| FcpBinState::new(p, b),
        )),
        Algorithm::Kpfcp(p) => StreamingAny::Kpfcp(StreamingDereverberator::new(
            bins,
            p.sigma,
            p.lambda_floor,
            |b| KpfcpBinState::new(p, b),
        )),
    })
}

pub enum StreamingAny {
    Fcp(StreamingDereverberator<FcpBinState>),
    Kpfcp(StreamingDereverberator<KpfcpBinState>),
}

impl StreamingAny {
    pub fn process_frame(&mut self, y: &[Complex64], s_nn: &[Complex64]) -> Result<Vec<Complex64>> {
        match self {
            StreamingAny::Fcp(s) => s.process_frame(y, s_nn),
            StreamingAny::Kpfcp(s) => s.process_frame(y, s_nn),
        }
    }
}
