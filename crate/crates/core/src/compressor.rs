//! One interface over every compressor: matrix plus byte budget in, wire
//! bytes out.
//!
//! Budgets count payload body bytes only; the 20-byte header rides on top.
//! A [`CompressionStream`] carries what persists between calls on one tensor
//! stream (feedback residual, warm-start basis, call counter for seeding).

use serde::{Deserialize, Serialize};

use crate::baselines::{fixedrank_config, quant_bits_for_budget, quant_body_bytes, quant_compress, randtopk_compress};
use crate::error::{Error, Result};
use crate::oasa::{self, ErrorState, OasaConfig};
use crate::rank::{factor_bytes, rank_for_bandwidth, select_rank, RankDecision, RankPolicy};
use crate::spectral::SpectralConfig;
use crate::tensor::{gaussian, orthonormalize, Mat, RngSeed};
use crate::wire::{self, Payload};

/// Settings of the adaptive low-rank compressor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NscParams {
    pub eta: f64,
    pub r_cap: usize,
    /// `probe_rank` and `seed` are chosen per call; `oversampling` and
    /// `power_iters` are used as given.
    pub spectral: SpectralConfig,
    /// `seed` is chosen per call.
    pub oasa: OasaConfig,
    pub ecl: bool,
    pub warm_start: bool,
}

impl Default for NscParams {
    fn default() -> Self {
        NscParams {
            eta: 0.95,
            r_cap: 32,
            spectral: SpectralConfig::default(),
            oasa: OasaConfig::default(),
            ecl: true,
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Compressor {
    Nsc(NscParams),
    RandTopK {
        random_frac: f64,
    },
    /// Bit width is the widest in `2..=max_bits` that fits the budget.
    Quant {
        max_bits: u8,
    },
    /// Rank `rank` (clamped to the matrix and the budget), `iters` iterations.
    FixedRank {
        rank: usize,
        iters: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompressorKind {
    Nsc,
    Randtopk,
    Quant,
    Fixedrank,
}

impl CompressorKind {
    pub const ALL: [CompressorKind; 4] = [
        CompressorKind::Nsc,
        CompressorKind::Randtopk,
        CompressorKind::Quant,
        CompressorKind::Fixedrank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CompressorKind::Nsc => "nsc",
            CompressorKind::Randtopk => "randtopk",
            CompressorKind::Quant => "quant",
            CompressorKind::Fixedrank => "fixedrank",
        }
    }
}

impl std::str::FromStr for CompressorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CompressorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown compressor `{s}`")))
    }
}

impl Compressor {
    pub fn kind(&self) -> CompressorKind {
        match self {
            Compressor::Nsc(_) => CompressorKind::Nsc,
            Compressor::RandTopK { .. } => CompressorKind::Randtopk,
            Compressor::Quant { .. } => CompressorKind::Quant,
            Compressor::FixedRank { .. } => CompressorKind::Fixedrank,
        }
    }

    /// Stateless one-shot compression.
    pub fn compress(&self, m: &Mat, byte_budget: usize, seed: RngSeed) -> Result<Compressed> {
        CompressionStream::new(*self, seed).compress(m, byte_budget)
    }
}

/// Decodes wire bytes from any compressor back into a dense matrix.
pub fn decompress(bytes: &[u8]) -> Result<Mat> {
    Ok(wire::decode(bytes)?.to_mat())
}

#[derive(Debug, Clone)]
pub struct Compressed {
    /// Header plus body.
    pub bytes: Vec<u8>,
    /// Transmitted rank for low-rank payloads.
    pub rank: Option<usize>,
    /// Rank-selection trace, when the adaptive compressor chose the rank.
    pub decision: Option<RankDecision>,
    pub iters: usize,
    /// Mean squared error against the matrix the compressor approximated:
    /// the input plus feedback residual when the error correction loop is on,
    /// the input otherwise.
    pub fit_mse: f64,
}

impl Compressed {
    pub fn body_len(&self) -> usize {
        self.bytes.len() - wire::HEADER_LEN
    }
}

#[derive(Debug, Clone)]
pub struct CompressionStream {
    compressor: Compressor,
    seed: RngSeed,
    calls: u64,
    error: Option<ErrorState>,
    warm_q: Option<Mat>,
}

impl CompressionStream {
    pub fn new(compressor: Compressor, seed: RngSeed) -> CompressionStream {
        CompressionStream {
            compressor,
            seed,
            calls: 0,
            error: None,
            warm_q: None,
        }
    }

    pub fn compressor(&self) -> &Compressor {
        &self.compressor
    }

    pub fn error_state(&self) -> Option<&ErrorState> {
        self.error.as_ref()
    }

    /// Drops the feedback residual and warm-start basis.
    pub fn reset(&mut self) {
        if let Some(e) = self.error.as_mut() {
            oasa::reset_error(e);
        }
        self.warm_q = None;
    }

    pub fn compress(&mut self, m: &Mat, byte_budget: usize) -> Result<Compressed> {
        self.compress_inner(m, byte_budget, None)
    }

    /// Low-rank compressors skip rank selection and use `rank` (clamped to the
    /// budget and matrix); other compressors ignore it.
    pub fn compress_at_rank(&mut self, m: &Mat, byte_budget: usize, rank: usize) -> Result<Compressed> {
        self.compress_inner(m, byte_budget, Some(rank))
    }

    fn compress_inner(&mut self, m: &Mat, byte_budget: usize, forced: Option<usize>) -> Result<Compressed> {
        let call = self.seed.derive(self.calls);
        self.calls += 1;
        let (rows, cols) = m.shape();
        let len = rows * cols;
        match self.compressor {
            Compressor::Nsc(params) => {
                let (r, decision) = match forced {
                    Some(r) => (clamp_rank(rows, cols, byte_budget, r)?, None),
                    None => {
                        let policy = RankPolicy {
                            eta: params.eta,
                            b_max: byte_budget,
                            r_cap: params.r_cap,
                        };
                        let spectral = SpectralConfig {
                            seed: call.derive(0),
                            ..params.spectral
                        };
                        let d = select_rank(m, &policy, &spectral)?;
                        (d.r_final, Some(d))
                    }
                };
                let cfg = OasaConfig {
                    seed: call.derive(1),
                    ..params.oasa
                };
                let warm = if params.warm_start {
                    self.warm_basis(cols, r, call.derive(2))?
                } else {
                    None
                };
                let state = self.error_for(rows, cols);
                let c = oasa::compress(m, r, &cfg, state, params.ecl, warm.as_ref())?;
                self.warm_q = Some(c.factors.q.clone());
                let bytes = wire::encode(&Payload::LowRank(c.factors))?;
                Ok(Compressed {
                    bytes,
                    rank: Some(r),
                    decision,
                    iters: c.iters_used,
                    fit_mse: (c.final_residual * c.target_norm).powi(2) / len as f64,
                })
            }
            Compressor::FixedRank { rank, iters } => {
                let r = clamp_rank(rows, cols, byte_budget, forced.unwrap_or(rank))?;
                let cfg = fixedrank_config(iters, call.derive(1));
                let mut unused = ErrorState::new(rows, cols);
                let c = oasa::compress(m, r, &cfg, &mut unused, false, None)?;
                Ok(Compressed {
                    bytes: wire::encode(&Payload::LowRank(c.factors))?,
                    rank: Some(r),
                    decision: None,
                    iters: c.iters_used,
                    fit_mse: (c.final_residual * c.target_norm).powi(2) / len as f64,
                })
            }
            Compressor::RandTopK { random_frac } => {
                let p = Payload::TopK(randtopk_compress(m, byte_budget, random_frac, call.derive(3))?);
                Ok(Compressed {
                    fit_mse: mse(m, &p.to_mat()),
                    bytes: wire::encode(&p)?,
                    rank: None,
                    decision: None,
                    iters: 0,
                })
            }
            Compressor::Quant { max_bits } => {
                let bits = quant_bits_for_budget(len, byte_budget, max_bits).ok_or(Error::BudgetTooSmall {
                    budget: byte_budget,
                    needed: quant_body_bytes(len, 2),
                })?;
                let p = Payload::Quant(quant_compress(m, bits, call.derive(4))?);
                Ok(Compressed {
                    fit_mse: mse(m, &p.to_mat()),
                    bytes: wire::encode(&p)?,
                    rank: None,
                    decision: None,
                    iters: 0,
                })
            }
        }
    }

    fn error_for(&mut self, rows: usize, cols: usize) -> &mut ErrorState {
        match &mut self.error {
            Some(e) if e.shape() == (rows, cols) => {}
            slot => *slot = Some(ErrorState::new(rows, cols)),
        }
        self.error.as_mut().expect("just set")
    }

    /// Previous `Q` adapted to rank `r`: truncated, or padded with random
    /// directions and re-orthonormalized.
    fn warm_basis(&self, cols: usize, r: usize, seed: RngSeed) -> Result<Option<Mat>> {
        let Some(prev) = &self.warm_q else {
            return Ok(None);
        };
        if prev.rows() != cols {
            return Ok(None);
        }
        if prev.cols() >= r {
            return Ok(Some(prev.leading_cols(r)));
        }
        let extra = gaussian(cols, r - prev.cols(), seed);
        let joined = Mat::from_fn(cols, r, |i, j| {
            if j < prev.cols() {
                prev.get(i, j)
            } else {
                extra.get(i, j - prev.cols())
            }
        });
        Ok(Some(orthonormalize(&joined)?))
    }
}

fn mse(a: &Mat, b: &Mat) -> f64 {
    (a - b).fro_norm_sq() / (a.rows() * a.cols()) as f64
}

fn clamp_rank(rows: usize, cols: usize, byte_budget: usize, r: usize) -> Result<usize> {
    let r_bw = rank_for_bandwidth(rows, cols, byte_budget);
    if r_bw == 0 {
        return Err(Error::BudgetTooSmall {
            budget: byte_budget,
            needed: factor_bytes(rows, cols, 1),
        });
    }
    Ok(r.min(r_bw).min(rows.min(cols)).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::planted;

    fn corpus(seed: u64) -> Mat {
        let sig: Vec<f64> = (1..=24).map(|i| 1.0 / (i * i) as f64).collect();
        planted(40, 24, &sig, RngSeed(seed))
    }

    #[test]
    fn every_variant_respects_budget_and_shape() {
        let variants = [
            Compressor::Nsc(NscParams::default()),
            Compressor::RandTopK { random_frac: 0.1 },
            Compressor::Quant { max_bits: 8 },
            Compressor::FixedRank { rank: 4, iters: 1 },
        ];
        let m = corpus(1);
        for c in variants {
            for budget in [600, 1000, 5000, 100_000] {
                let out = c.compress(&m, budget, RngSeed(2)).unwrap();
                assert!(out.body_len() <= budget, "{:?} {budget}", c.kind());
                let back = decompress(&out.bytes).unwrap();
                assert_eq!(back.shape(), m.shape());
                assert!(back.is_finite());
            }
        }
    }

    #[test]
    fn nsc_budget_failure() {
        let m = corpus(3);
        let err = Compressor::Nsc(NscParams::default())
            .compress(&m, 100, RngSeed(0))
            .unwrap_err();
        assert_eq!(
            err,
            Error::BudgetTooSmall {
                budget: 100,
                needed: 256
            }
        );
    }

    #[test]
    fn stream_keeps_error_state_and_resets() {
        let m = corpus(4);
        let mut s = CompressionStream::new(Compressor::Nsc(NscParams::default()), RngSeed(5));
        s.compress(&m, 2000).unwrap();
        assert!(s.error_state().unwrap().residual().fro_norm() > 0.0);
        s.reset();
        assert_eq!(s.error_state().unwrap().residual().fro_norm(), 0.0);
    }

    #[test]
    fn forced_rank_is_clamped_to_budget() {
        let m = corpus(6);
        let mut s = CompressionStream::new(Compressor::Nsc(NscParams::default()), RngSeed(7));
        let out = s.compress_at_rank(&m, factor_bytes(40, 24, 3), 10).unwrap();
        assert_eq!(out.rank, Some(3));
    }

    #[test]
    fn warm_start_adapts_rank() {
        let m = corpus(8);
        let params = NscParams {
            warm_start: true,
            ..NscParams::default()
        };
        let mut s = CompressionStream::new(Compressor::Nsc(params), RngSeed(9));
        s.compress_at_rank(&m, usize::MAX, 3).unwrap();
        let up = s.compress_at_rank(&m, usize::MAX, 6).unwrap();
        assert_eq!(up.rank, Some(6));
        let down = s.compress_at_rank(&m, usize::MAX, 2).unwrap();
        assert_eq!(down.rank, Some(2));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("quant".parse::<CompressorKind>().unwrap(), CompressorKind::Quant);
        assert!("zip".parse::<CompressorKind>().is_err());
    }
}
