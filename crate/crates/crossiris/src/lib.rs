//! Cross-spectral, cross-resolution iris verification.
//!
//! The crate couples a minimal autodiff tensor engine with two GAN-based
//! matchers (a domain-translating conditional GAN and a coupled-embedding
//! cpGAN), a classical Gabor IrisCode baseline, synthetic bi-spectral data
//! generation, Daugman rubber-sheet preprocessing, and a GAR/FAR/EER
//! evaluation harness. Everything is deterministic under a fixed seed.

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod iriscode;
pub mod losses;
pub mod models;
pub mod normalize;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Parameter, Tensor};
