//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("signal contains non-finite samples ({context})")]
    NonFinite { context: String },

    #[error("WDM channel {channel} exceeds the simulation bandwidth: |offset| + bw/2 = {occupied_hz:.3e} Hz >= f_s/2 = {limit_hz:.3e} Hz")]
    SpectralOverflow {
        channel: usize,
        occupied_hz: f64,
        limit_hz: f64,
    },

    #[error("filter of length {filter_len} does not fit block of length {block_len}")]
    FilterTooLong { filter_len: usize, block_len: usize },

    #[error("sample-rate mismatch: signal at {signal_hz:.6e} Hz, model at {model_hz:.6e} Hz")]
    RateMismatch { signal_hz: f64, model_hz: f64 },

    #[error("non-finite activations in layer {layer}")]
    LayerNan { layer: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training diverged at iteration {iteration}: loss {loss:.3e} exceeds 1000x initial loss {initial:.3e} for 100 consecutive iterations")]
    Diverged {
        iteration: usize,
        loss: f64,
        initial: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
