//! Frame-online speech dereverberation by forward convolutive prediction.
//!
//! The observation Y(t, f) is modelled as the direct path plus its own
//! reverberation. Given an estimate of the direct path, a per-bin linear
//! filter predicts the reverberant observation from the current and past
//! estimates; the prediction minus the estimate is the reverberation, which
//! is subtracted from Y. Two filter structures are provided: a full K-tap
//! filter ([`fcp`]) and a Kronecker-factored filter built from two short
//! filters ([`kpfcp`]).

pub mod complexity;
pub mod dereverb;
pub mod error;
pub mod estimator;
pub mod fcp;
pub mod kpfcp;
pub mod kron;
pub mod lambda;
pub mod metrics;
mod rls;
pub mod room;
pub mod speech;
pub mod stft;
pub mod wav;

pub use dereverb::{dereverberate, measure_macs, Algorithm, ProcessOptions, ProcessOutput};
pub use error::{Error, Result};
pub use fcp::{fcp_process, fcp_step, FcpBinState, FcpParams};
pub use kpfcp::{kpfcp_process, kpfcp_step, KpfcpBinState, KpfcpParams};
pub use rls::InverseCorrelation;
pub use stft::{analyze, synthesize, SampleBuffer, StftConfig, TFGrid};
