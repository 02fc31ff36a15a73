//! Randomized estimation of leading singular values and subspaces.
//!
//! Sketch `Y = M * Omega` with a Gaussian probe of `r0 + p` columns, sharpen it
//! with `q` rounds of subspace iteration, project `B = Q^T M` and take the exact
//! SVD of the small `B`. Each power round applies `M^T` and then `M`,
//! re-orthonormalizing after every half-step, which spans the same subspace as
//! `(M M^T)^q M Omega` without squaring the condition number each round.
//! `q = 0` is the plain range finder.

use crate::error::{Error, Result};
use crate::tensor::{exact_svd, gaussian, orthonormalize, Mat, RngSeed};

pub const MAX_POWER_ITERS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    /// Number of singular values to return (`r0`).
    pub probe_rank: usize,
    /// Extra probe columns (`p`).
    pub oversampling: usize,
    /// Power rounds (`q`), at most [`MAX_POWER_ITERS`].
    pub power_iters: usize,
    pub seed: RngSeed,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            probe_rank: 8,
            oversampling: 8,
            power_iters: 2,
            seed: RngSeed(0x5eed),
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        let min_dim = rows.min(cols);
        if self.probe_rank == 0 {
            return Err(Error::InvalidConfig("probe_rank must be >= 1".into()));
        }
        if self.probe_rank + self.oversampling > min_dim {
            return Err(Error::InvalidConfig(format!(
                "probe_rank + oversampling = {} exceeds min dimension {min_dim}",
                self.probe_rank + self.oversampling
            )));
        }
        if self.power_iters > MAX_POWER_ITERS {
            return Err(Error::InvalidConfig(format!(
                "power_iters = {} exceeds cap {MAX_POWER_ITERS}",
                self.power_iters
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    /// Non-increasing, non-negative, length `probe_rank`.
    pub sigmas: Vec<f64>,
    /// `m x probe_rank`, orthonormal columns.
    pub u: Mat,
    /// `n x probe_rank`, orthonormal columns.
    pub v: Mat,
}

pub fn estimate_spectrum(m: &Mat, cfg: &SpectralConfig) -> Result<SpectralEstimate> {
    let (rows, cols) = m.shape();
    cfg.validate(rows, cols)?;
    m.check_finite()?;
    let width = cfg.probe_rank + cfg.oversampling;

    let omega = gaussian(cols, width, cfg.seed);
    let mut y = orthonormalize(&m.matmul(&omega)?)?;
    for _ in 0..cfg.power_iters {
        let z = orthonormalize(&m.t_matmul(&y)?)?;
        y = orthonormalize(&m.matmul(&z)?)?;
    }

    let b = y.t_matmul(m)?;
    let svd = exact_svd(&b)?;
    let r0 = cfg.probe_rank;
    let u = y.matmul(&svd.u.leading_cols(r0))?;
    let v = svd.v.leading_cols(r0);
    let sigmas = svd.s[..r0].iter().map(|s| s.max(0.0)).collect();
    Ok(SpectralEstimate { sigmas, u, v })
}
