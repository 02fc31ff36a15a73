//! Reference compressors: random-top-k sparsification, stochastic uniform
//! quantization and fixed-rank power compression.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::oasa::{self, ErrorState, LowRankFactors, OasaConfig};
use crate::tensor::{Mat, RngSeed};
use crate::wire::{QuantPayload, SparsePayload};

/// Bytes per (u32 index, f32 value) pair.
pub const TOPK_ENTRY_BYTES: usize = 8;

/// Keeps `k = min(budget / 8, m n)` entries: the largest
/// `ceil((1 - random_frac) k)` by magnitude (ties to the lower flat index)
/// plus a uniform sample of the remaining positions.
pub fn randtopk_compress(m: &Mat, byte_budget: usize, random_frac: f64, seed: RngSeed) -> Result<SparsePayload> {
    if byte_budget < TOPK_ENTRY_BYTES {
        return Err(Error::BudgetTooSmall {
            budget: byte_budget,
            needed: TOPK_ENTRY_BYTES,
        });
    }
    if !(0.0..=1.0).contains(&random_frac) {
        return Err(Error::InvalidConfig(format!(
            "random_frac {random_frac} outside [0, 1]"
        )));
    }
    let data = m.as_slice();
    let total = data.len();
    if total > u32::MAX as usize {
        return Err(Error::ShapeOverflow(total));
    }
    let k = (byte_budget / TOPK_ENTRY_BYTES).min(total);
    let top = (((1.0 - random_frac) * k as f64).ceil() as usize).min(k);

    let mut order: Vec<usize> = (0..total).collect();
    order.sort_unstable_by(|&a, &b| data[b].abs().total_cmp(&data[a].abs()).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = order[..top].to_vec();
    let rest = &order[top..];
    let extra = k - top;
    if extra > 0 {
        let mut rng = seed.rng();
        chosen.extend(sample(&mut rng, rest.len(), extra).into_iter().map(|i| rest[i]));
    }
    chosen.sort_unstable();
    Ok(SparsePayload {
        rows: m.rows(),
        cols: m.cols(),
        entries: chosen.into_iter().map(|i| (i as u32, data[i] as f32)).collect(),
    })
}

/// Body bytes of a `bits`-wide quantized payload for `len` entries.
pub fn quant_body_bytes(len: usize, bits: u8) -> usize {
    4 + (len * bits as usize).div_ceil(8)
}

/// Widest bit width in `2..=max_bits` whose body fits `byte_budget`.
pub fn quant_bits_for_budget(len: usize, byte_budget: usize, max_bits: u8) -> Option<u8> {
    (2..=max_bits.min(8))
        .rev()
        .find(|&b| quant_body_bytes(len, b) <= byte_budget)
}

/// Stochastic rounding onto `2^bits - 1` uniform levels in `[-s, s]`,
/// `s = max |entry|`. Unbiased: the expected level equals the entry.
pub fn quant_compress(m: &Mat, bits: u8, seed: RngSeed) -> Result<QuantPayload> {
    if !(2..=8).contains(&bits) {
        return Err(Error::InvalidConfig(format!("bit width {bits} outside 2..=8")));
    }
    m.check_finite()?;
    let max = m.max_abs();
    let mut scale = max as f32;
    if (scale as f64) < max {
        scale = f32::from_bits(scale.to_bits() + 1);
    }
    let top = QuantPayload::levels(bits) - 1;
    let codes = if scale == 0.0 {
        vec![0; m.as_slice().len()]
    } else {
        let s = scale as f64;
        let spacing = 2.0 * s / top as f64;
        let mut rng = seed.rng();
        m.as_slice()
            .iter()
            .map(|&x| {
                let u = ((x + s) / spacing).clamp(0.0, top as f64);
                let lo = (u.floor() as u32).min(top - 1);
                let up = rng.random::<f64>() < u - lo as f64;
                (lo + up as u32) as u8
            })
            .collect()
    };
    Ok(QuantPayload {
        rows: m.rows(),
        cols: m.cols(),
        bits,
        scale,
        codes,
    })
}

/// Fixed-rank alternating power compression: OASA with the error loop off
/// and exactly `iters` iterations.
pub fn fixedrank_compress(m: &Mat, rank: usize, iters: usize, seed: RngSeed) -> Result<LowRankFactors> {
    let cfg = fixedrank_config(iters, seed);
    let mut unused = ErrorState::new(m.rows(), m.cols());
    Ok(oasa::compress(m, rank, &cfg, &mut unused, false, None)?.factors)
}

/// The OASA configuration the fixed-rank baseline delegates to.
pub fn fixedrank_config(iters: usize, seed: RngSeed) -> OasaConfig {
    OasaConfig {
        max_iters: iters.max(1),
        min_iters: iters.max(1),
        seed,
        ..OasaConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{gaussian, planted};

    #[test]
    fn topk_keeps_largest() {
        let m = Mat::from_rows(&[[5.0, -7.0], [1.0, 0.0]]);
        let p = randtopk_compress(&m, 16, 0.0, RngSeed(0)).unwrap();
        assert_eq!(p.entries, vec![(0, 5.0), (1, -7.0)]);
    }

    #[test]
    fn topk_tie_breaks_to_lower_index() {
        let m = Mat::from_rows(&[[1.0, -2.0, 2.0, 2.0]]);
        let p = randtopk_compress(&m, 16, 0.0, RngSeed(0)).unwrap();
        assert_eq!(p.entries, vec![(1, -2.0), (2, 2.0)]);
    }

    #[test]
    fn topk_lossless_with_full_budget() {
        let m = gaussian(6, 5, RngSeed(1));
        let p = randtopk_compress(&m, 8 * 30, 0.0, RngSeed(0)).unwrap();
        let back = p.to_mat();
        for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
            assert_eq!(*a as f32 as f64, *b);
        }
    }

    #[test]
    fn topk_random_part_avoids_top_positions() {
        let m = gaussian(10, 10, RngSeed(2));
        let p = randtopk_compress(&m, 8 * 20, 0.5, RngSeed(3)).unwrap();
        assert_eq!(p.entries.len(), 20);
        assert!(p.entries.windows(2).all(|w| w[0].0 < w[1].0));
        let hard = randtopk_compress(&m, 8 * 10, 0.0, RngSeed(3)).unwrap();
        for e in &hard.entries {
            assert!(p.entries.contains(e));
        }
    }

    #[test]
    fn topk_budget_floor() {
        let m = gaussian(2, 2, RngSeed(4));
        assert!(matches!(
            randtopk_compress(&m, 7, 0.0, RngSeed(0)),
            Err(Error::BudgetTooSmall { needed: 8, .. })
        ));
    }

    #[test]
    fn quant_lattice_fixed_point() {
        // 3 bits: 7 levels over [-1.5, 1.5], spacing 0.5
        let m = Mat::from_rows(&[[-1.5, -1.0, 0.0], [0.5, 1.5, 1.0]]);
        let q = quant_compress(&m, 3, RngSeed(5)).unwrap();
        assert_eq!(q.to_mat(), m);
    }

    #[test]
    fn quant_zero_matrix() {
        let q = quant_compress(&Mat::zeros(3, 3), 4, RngSeed(6)).unwrap();
        assert_eq!(q.scale, 0.0);
        assert!(q.codes.iter().all(|&c| c == 0));
        assert_eq!(q.to_mat(), Mat::zeros(3, 3));
    }

    #[test]
    fn quant_error_within_one_spacing() {
        let m = gaussian(16, 16, RngSeed(7));
        let q = quant_compress(&m, 8, RngSeed(8)).unwrap();
        let spacing = q.spacing();
        assert!((spacing - 2.0 * q.scale as f64 / 254.0).abs() < 1e-15);
        let back = q.to_mat();
        for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() <= spacing);
        }
    }

    #[test]
    fn quant_is_unbiased_on_a_scalar() {
        let m = Mat::from_rows(&[[0.3, 1.0]]);
        let trials = 1000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for t in 0..trials {
            let v = quant_compress(&m, 2, RngSeed(t)).unwrap().to_mat().get(0, 0);
            sum += v;
            sq += v * v;
        }
        let mean = sum / trials as f64;
        let var = sq / trials as f64 - mean * mean;
        let se = (var / trials as f64).sqrt();
        assert!((mean - 0.3).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn quant_bits_for_budget_picks_widest() {
        assert_eq!(quant_bits_for_budget(64, 4 + 64, 8), Some(8));
        assert_eq!(quant_bits_for_budget(64, 4 + 40, 8), Some(5));
        assert_eq!(quant_bits_for_budget(64, 4 + 15, 8), None);
        assert_eq!(quant_bits_for_budget(64, 1000, 4), Some(4));
    }

    #[test]
    fn fixedrank_delegates_to_oasa() {
        let a = planted(20, 12, &[3.0, 1.0, 0.5, 0.1], RngSeed(9));
        let f = fixedrank_compress(&a, 2, 3, RngSeed(10)).unwrap();
        let mut st = ErrorState::new(20, 12);
        let direct = oasa::compress(&a, 2, &fixedrank_config(3, RngSeed(10)), &mut st, false, None).unwrap();
        assert_eq!(f, direct.factors);
        assert_eq!(direct.iters_used, 3);
    }

    #[test]
    fn fixedrank_exact_rank_round_trip() {
        let a = planted(20, 12, &[3.0, 1.0], RngSeed(11));
        let f = fixedrank_compress(&a, 2, 2, RngSeed(12)).unwrap();
        assert!((&a - &oasa::decompress(&f)).fro_norm() < 1e-9 * a.fro_norm());
    }
}
