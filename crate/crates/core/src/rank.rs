//! Bandwidth-aware rank selection.
//!
//! The transmitted rank is the smallest of three bounds: the rank needed to
//! cover an `eta` fraction of the spectral energy, the largest rank whose
//! single-precision factors (`4 r (m + n)` bytes) fit the byte budget, and a
//! fixed cap.

use crate::error::{Error, Result};
use crate::spectral::{estimate_spectrum, SpectralConfig};
use crate::tensor::Mat;

/// Bytes per transmitted factor entry (f32).
pub const BYTES_PER_VALUE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankPolicy {
    /// Energy-coverage threshold, strictly between 0 and 1.
    pub eta: f64,
    /// Factor-data budget in bytes; the wire header is not counted.
    pub b_max: usize,
    pub r_cap: usize,
}

impl RankPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eta must lie in (0, 1), got {}",
                self.eta
            )));
        }
        if self.r_cap == 0 {
            return Err(Error::InvalidConfig("r_cap must be >= 1".into()));
        }
        if self.b_max == 0 {
            return Err(Error::InvalidConfig("b_max must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankDecision {
    pub r_final: usize,
    pub r_eta: usize,
    pub r_bandwidth: usize,
    pub r_cap: usize,
    /// Fraction of `||M||_F^2` carried by the leading `r_final` estimated components.
    pub energy_covered: f64,
}

/// Smallest `r` whose leading squared sigmas reach `eta` of the total over
/// all given sigmas. An all-zero spectrum yields 1.
pub fn rank_for_energy(sigmas: &[f64], eta: f64) -> usize {
    debug_assert!(sigmas.windows(2).all(|w| w[0] >= w[1]), "sigmas must be sorted");
    let total: f64 = sigmas.iter().map(|s| s * s).sum();
    rank_for_energy_of_total(sigmas, total, eta).unwrap_or(sigmas.len().max(1))
}

/// Like [`rank_for_energy`] but against an externally known total energy.
/// `None` when the given sigmas never reach `eta` of `total`.
pub fn rank_for_energy_of_total(sigmas: &[f64], total: f64, eta: f64) -> Option<usize> {
    if total <= 0.0 {
        return Some(1);
    }
    let mut acc = 0.0;
    for (i, s) in sigmas.iter().enumerate() {
        acc += s * s;
        if acc / total >= eta {
            return Some(i + 1);
        }
    }
    None
}

/// `floor(b_max / (4 (m + n)))`; 0 when even rank 1 does not fit.
pub fn rank_for_bandwidth(m: usize, n: usize, b_max: usize) -> usize {
    b_max / (BYTES_PER_VALUE * (m + n))
}

/// Factor-data bytes for a rank-`r` payload.
pub fn factor_bytes(m: usize, n: usize, r: usize) -> usize {
    BYTES_PER_VALUE * r * (m + n)
}

/// Estimates the spectrum of `m` and combines the three rank bounds.
///
/// The probe width overrides `spectral.probe_rank`: it is the largest rank
/// that could be selected, `min(r_cap, r_bandwidth, min(rows, cols))`, with
/// oversampling trimmed so the sketch still fits. The energy denominator is
/// the exact `||M||_F^2`; when the probed sigmas never reach `eta` the
/// energy rank is taken as `min(rows, cols)`.
pub fn select_rank(m: &Mat, policy: &RankPolicy, spectral: &SpectralConfig) -> Result<RankDecision> {
    policy.validate()?;
    let (rows, cols) = m.shape();
    let r_bandwidth = rank_for_bandwidth(rows, cols, policy.b_max);
    if r_bandwidth == 0 {
        return Err(Error::BudgetTooSmall {
            budget: policy.b_max,
            needed: factor_bytes(rows, cols, 1),
        });
    }
    let total = m.fro_norm_sq();
    if total == 0.0 {
        return Ok(RankDecision {
            r_final: 1,
            r_eta: 1,
            r_bandwidth,
            r_cap: policy.r_cap,
            energy_covered: 1.0,
        });
    }

    let min_dim = rows.min(cols);
    let probe = policy.r_cap.min(r_bandwidth).min(min_dim);
    let cfg = SpectralConfig {
        probe_rank: probe,
        oversampling: spectral.oversampling.min(min_dim - probe),
        ..*spectral
    };
    let est = estimate_spectrum(m, &cfg)?;
    let r_eta = rank_for_energy_of_total(&est.sigmas, total, policy.eta).unwrap_or(min_dim);
    let r_final = r_eta.min(r_bandwidth).min(policy.r_cap).max(1);
    let kept: f64 = est.sigmas[..r_final].iter().map(|s| s * s).sum();
    Ok(RankDecision {
        r_final,
        r_eta,
        r_bandwidth,
        r_cap: policy.r_cap,
        energy_covered: (kept / total).clamp(0.0, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{gaussian, planted, RngSeed};

    #[test]
    fn energy_rank_examples() {
        assert_eq!(rank_for_energy(&[3.0, 2.0, 1.0], 0.9), 2);
        for eta in [0.01, 0.5, 0.99] {
            assert_eq!(rank_for_energy(&[5.0, 0.0, 0.0], eta), 1);
        }
        // 2/4 meets the threshold exactly
        assert_eq!(rank_for_energy(&[1.0, 1.0, 1.0, 1.0], 0.5), 2);
        assert_eq!(rank_for_energy(&[0.0, 0.0], 0.7), 1);
    }

    #[test]
    fn bandwidth_rank_examples() {
        assert_eq!(rank_for_bandwidth(512, 256, 1_000_000), 325);
        assert_eq!(rank_for_bandwidth(1, 1, 8), 1);
        assert_eq!(rank_for_bandwidth(100, 100, 799), 0);
    }

    #[test]
    fn select_halving_spectrum_picks_energy_rank() {
        let sig: Vec<f64> = (1..=64).map(|i| 2f64.powi(-i)).collect();
        let a = planted(64, 64, &sig, RngSeed(1));
        let policy = RankPolicy {
            eta: 0.9,
            b_max: 10_000_000,
            r_cap: 32,
        };
        let d = select_rank(&a, &policy, &SpectralConfig::default()).unwrap();
        assert_eq!(d.r_eta, 2);
        assert_eq!(d.r_final, 2);
        assert!((d.energy_covered - 0.9375).abs() < 1e-6);
    }

    #[test]
    fn cap_and_budget_dominate() {
        let a = gaussian(100, 100, RngSeed(2));
        let capped = RankPolicy {
            eta: 0.99,
            b_max: 10_000_000,
            r_cap: 1,
        };
        assert_eq!(select_rank(&a, &capped, &SpectralConfig::default()).unwrap().r_final, 1);
        let budget = RankPolicy {
            eta: 0.999_999,
            b_max: 4000,
            r_cap: 100,
        };
        let d = select_rank(&a, &budget, &SpectralConfig::default()).unwrap();
        assert_eq!(d.r_bandwidth, 5);
        assert_eq!(d.r_final, 5);
    }

    #[test]
    fn budget_below_rank_one_errors() {
        let a = gaussian(100, 100, RngSeed(3));
        let p = RankPolicy {
            eta: 0.9,
            b_max: 799,
            r_cap: 4,
        };
        assert_eq!(
            select_rank(&a, &p, &SpectralConfig::default()).unwrap_err(),
            Error::BudgetTooSmall {
                budget: 799,
                needed: 800
            }
        );
    }

    #[test]
    fn zero_matrix_selects_rank_one() {
        let p = RankPolicy {
            eta: 0.9,
            b_max: 10_000,
            r_cap: 4,
        };
        let d = select_rank(&Mat::zeros(8, 8), &p, &SpectralConfig::default()).unwrap();
        assert_eq!(d.r_final, 1);
    }

    #[test]
    fn invalid_eta_rejected() {
        let p = RankPolicy {
            eta: 1.0,
            b_max: 10_000,
            r_cap: 4,
        };
        assert!(select_rank(&Mat::zeros(8, 8), &p, &SpectralConfig::default()).is_err());
    }
}
