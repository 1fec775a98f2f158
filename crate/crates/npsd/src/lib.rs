//! Time-varying noise power spectral density estimation for single-channel
//! noisy speech in the STFT domain.
//!
//! The estimator is a small stacked-LSTM regressor applied per frequency
//! band: a window of normalized noisy STFT magnitudes (the bin and its two
//! neighbours) maps to the normalized log noise PSD of the center bin. The
//! crate also provides the full surrounding pipeline: corpus mixing at
//! target SNRs, ground-truth PSD computation, from-scratch training (BPTT +
//! Adam with early stopping), a minimum-statistics baseline, Wiener
//! enhancement, and LogErr / segmental-SNR evaluation.

pub mod config;
pub mod dataset;
pub mod dsp;
pub mod enhance;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod net;
pub mod seed;
pub mod signals;
pub mod wav;

pub use config::Settings;
pub use error::{Error, Result};
