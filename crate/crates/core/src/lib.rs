//! Bandwidth-aware low-rank compression of split-learning traffic.
//!
//! The pipeline for one tensor is: estimate its leading spectrum with a
//! randomized sketch ([`spectral`]), pick a rank from energy coverage, the
//! byte budget and a cap ([`rank`]), factorize at that rank with alternating
//! orthogonal iteration plus residual feedback ([`oasa`]), and serialize the
//! factors ([`wire`]). [`baselines`] holds the sparsification, quantization
//! and fixed-rank comparators, all reachable through [`compressor`].
//! [`sim`] runs split learning over a modeled link and [`bench`] holds the
//! sweeps and oracle comparisons behind the `nsc` binary.

pub mod baselines;
pub mod bench;
pub mod compressor;
pub mod error;
pub mod oasa;
pub mod rank;
pub mod sim;
pub mod spectral;
pub mod tensor;
pub mod wire;

pub use compressor::{Compressed, CompressionStream, Compressor, CompressorKind, NscParams};
pub use error::{Error, Result};
pub use oasa::{ErrorState, LowRankFactors, OasaConfig, ResidualTarget};
pub use rank::{RankDecision, RankPolicy};
pub use spectral::{SpectralConfig, SpectralEstimate};
pub use tensor::{Mat, RngSeed};
