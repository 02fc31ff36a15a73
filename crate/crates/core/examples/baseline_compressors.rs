//! Every compressor on the same matrix and byte budget.
//!
//!     cargo run --example baseline_compressors

use nsc_core::compressor::decompress;
use nsc_core::tensor::planted;
use nsc_core::{Compressor, NscParams, RngSeed};

fn main() -> nsc_core::Result<()> {
    let sigmas: Vec<f64> = (0..32).map(|i| 0.7f64.powi(i)).collect();
    let m = planted(128, 32, &sigmas, RngSeed(1));
    let budget = 4_000;

    let compressors = [
        Compressor::Nsc(NscParams {
            eta: 0.9999,
            ecl: false,
            ..NscParams::default()
        }),
        Compressor::RandTopK { random_frac: 0.1 },
        Compressor::Quant { max_bits: 8 },
        Compressor::FixedRank { rank: 8, iters: 1 },
    ];
    println!(
        "budget {budget} bytes for a 128x32 matrix ({} raw f32 bytes)",
        4 * 128 * 32
    );
    for c in compressors {
        let out = c.compress(&m, budget, RngSeed(2))?;
        let back = decompress(&out.bytes)?;
        let mse = (&m - &back).fro_norm_sq() / (128 * 32) as f64;
        println!(
            "{:<10} body {:>5} bytes  rank {:<4} mse {mse:.3e}",
            c.kind().name(),
            out.body_len(),
            out.rank.map(|r| r.to_string()).unwrap_or_else(|| "-".into()),
        );
    }
    Ok(())
}
