//! Per-TF-unit cost weighting λ = |Y|² + σ·(running max |Y|)².

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::stft::TFGrid;
use num_complex::Complex64;

pub const DEFAULT_LAMBDA_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaTracker {
    running_max_mag: f64,
    sigma: f64,
    floor: f64,
}

impl LambdaTracker {
    pub fn new(sigma: f64, floor: f64) -> Self {
        Self {
            running_max_mag: 0.0,
            sigma,
            floor,
        }
    }

    pub fn running_max(&self) -> f64 {
        self.running_max_mag
    }

    /// Folds `y` into the running maximum without producing a weight.
    pub fn observe(&mut self, y: Complex64) {
        self.running_max_mag = self.running_max_mag.max(y.norm());
    }

    /// Weight for `y` against the current running maximum.
    pub fn weight(&self, y: Complex64) -> f64 {
        (y.norm_sqr() + self.sigma * self.running_max_mag * self.running_max_mag).max(self.floor)
    }

    /// Observe then weigh a single unit.
    pub fn update(&mut self, y: Complex64) -> f64 {
        self.observe(y);
        self.weight(y)
    }

    /// Frame-level pass: every bin of the frame enters the maximum before
    /// any weight of that frame is produced.
    pub fn frame_weights(&mut self, frame: &[Complex64], out: &mut [f64]) {
        frame.iter().for_each(|y| self.observe(*y));
        for (w, y) in out.iter_mut().zip(frame) {
            *w = self.weight(*y);
        }
    }
}

/// λ for every TF unit of `observed`, frames processed in order.
pub fn lambda_grid(observed: &TFGrid, sigma: f64, floor: f64) -> Array2<f64> {
    let mut tracker = LambdaTracker::new(sigma, floor);
    let mut out = Array2::zeros(observed.data.dim());
    let mut row_buf = vec![Complex64::default(); observed.num_bins()];
    for (row, mut dst) in observed.data.rows().into_iter().zip(out.rows_mut()) {
        row_buf.iter_mut().zip(row.iter()).for_each(|(d, s)| *d = *s);
        let dst = dst.as_slice_mut().expect("standard layout");
        tracker.frame_weights(&row_buf, dst);
    }
    out
}
