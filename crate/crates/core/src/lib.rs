//! Link-level simulation of a three-cell network-MIMO downlink.
//!
//! The crate covers the whole chain from channel generation to campaign
//! statistics:
//!
//! * [`channel`]: tapped-delay-line indoor channels with cell isolation and
//!   Gauss–Markov mobility, plus trace persistence.
//! * [`codec`]: 802.11ac-style compressed beamforming feedback (SVD, Givens
//!   angles, angle/SNR quantization, bit packing, overhead accounting).
//! * [`beamform`]: interference alignment, CoMP zero-forcing initialisation,
//!   max-SINR refinement and the non-beamformed reference schemes.
//! * [`impairments`]: power-dependent EVM noise and Laplacian common phase
//!   error for transmit and receive chains.
//! * [`link`]: frequency-domain frame simulation with MMSE reception,
//!   pilot phase tracking and threshold-based MCS selection.
//! * [`harness`]: seeded, paired campaigns and gain tables.

pub mod beamform;
pub mod channel;
pub mod codec;
pub mod error;
pub mod harness;
pub mod impairments;
pub mod linalg;
pub mod link;
pub mod seed;

pub use error::{Error, Result};
pub use num_complex::Complex64;
