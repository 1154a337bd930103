//! Split-step fiber simulation and learned digital backpropagation (LDBP).
//!
//! This crate simulates single- and multi-channel transmission over
//! standard single-mode fiber (split-step solution of the nonlinear
//! Schrödinger equation with lumped amplification) and implements a
//! trainable receiver-side equalizer: a multi-layer split-step model
//! whose linear steps are short symmetric FIR filters. The filters are
//! optimized by gradient descent on the end-to-end symbol MSE and can
//! be progressively shortened during training by masking their
//! outermost taps.
//!
//! Module map:
//!
//! - [`signal`] — symbol generation, RRC pulse shaping, WDM multiplexing
//! - [`channel`] — split-step forward propagation and EDFA noise
//! - [`model`] — the layered equalizer (symmetric FIR + Kerr steps)
//! - [`init`] — step-size plans and filter initializers (least squares,
//!   multi-objective joint design, z-domain factorization)
//! - [`rxdsp`] — receiver chain: low-pass + decimation, reference
//!   equalizers, matched filter, phase correction, SNR metrics
//! - [`train`] — hand-derived reverse-mode gradients, Adam, tap
//!   pruning, the training loop
//! - [`cli`] — experiment runner behind the `ldbp` binary
//!
//! See the crate's `examples/` directory for one runnable example per
//! capability; `cargo run --example <name>`.

pub mod channel;
pub mod cli;
pub mod error;
pub mod fft;
pub mod init;
pub mod model;
pub mod rng;
pub mod rxdsp;
pub mod signal;
pub mod train;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;
