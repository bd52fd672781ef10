//! Core of a speaker voice similarity assessment network.
//!
//! Two utterances are encoded by a shared raw-waveform encoder (learnable
//! sinc filterbank, four residual-skip dilated convolution blocks, a
//! bidirectional LSTM), aligned to each other with scaled dot-product
//! co-attention, compared through per-dimension distances of their mean
//! representations, and scored by a small prediction head on the 1 (same
//! speaker) to 4 (different speakers) scale.
//!
//! This crate is `no_std` + `alloc`: it holds the numerics, training math,
//! evaluation metrics and synthetic data generator. File formats, the
//! training driver and the command line live in the `svsnet` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod attention;
pub mod data;
pub mod encoder;
pub mod error;
pub mod frontend;
pub mod head;
pub mod metrics;
pub mod model;
pub mod params;
pub mod real;
pub mod rng;
pub mod signal;
pub mod synth;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use model::{ModelConfig, PairInput, Svsnet};
pub use params::ParamStore;
pub use real::Real;
pub use signal::Waveform;
