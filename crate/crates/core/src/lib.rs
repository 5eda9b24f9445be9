//! Simulation of blind federated learning over a multipath fading
//! multiple-access channel.
//!
//! Workers encode their local gradients onto OFDM subcarriers and transmit
//! them, without channel knowledge, through possibly low-resolution DACs. A
//! multi-antenna parameter server receives the superposition, optionally
//! through low-resolution ADCs, aligns the antennas with its channel knowledge
//! and recovers an estimate of the mean gradient for the global update.
//!
//! The crate is organised along the signal path:
//!
//! - [`quantizer`]: Lloyd-Max Gaussian quantizers and their Bussgang gains.
//! - [`ofdm`]: gradient packing, segmentation, IDFT/DFT and cyclic prefix.
//! - [`channel`]: Rayleigh tapped-delay-line channels and AWGN.
//! - [`receiver`]: ADC, combiners, gradient recovery, five-term decomposition.
//! - [`learner`] and [`dataset`]: softmax regression, shards, optimizers.
//! - [`analysis`]: Monte Carlo checks of the interference/distortion statistics.
//! - [`runner`]: experiment configuration, the iteration loop, CSV output.
//!
//! Inner loops over antennas, workers and Monte Carlo trials run on rayon
//! when the `parallel` feature is enabled (the default). Every parallel map
//! collects in index order and reduces sequentially, so results are
//! bit-identical to the sequential path.

pub mod analysis;
pub mod channel;
pub mod dataset;
mod error;
pub mod fft;
pub mod learner;
pub mod ofdm;
pub mod par;
pub mod quantizer;
pub mod receiver;
pub mod rng;
pub mod runner;

pub use error::{Error, Result};
pub use num_complex::Complex64;
