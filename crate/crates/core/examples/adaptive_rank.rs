//! Rank selection: the smallest rank covering `eta` of the energy, bounded by
//! what fits the byte budget and by a cap.
//!
//!     cargo run --example adaptive_rank

use nsc_core::rank::{factor_bytes, select_rank};
use nsc_core::tensor::planted;
use nsc_core::{RankPolicy, RngSeed, SpectralConfig};

fn main() -> nsc_core::Result<()> {
    let sigmas: Vec<f64> = (1..=64).map(|i| (i as f64).powf(-1.0)).collect();
    let m = planted(128, 64, &sigmas, RngSeed(3));

    println!(
        "{:>8} {:>6} {:>6} {:>6} {:>6} {:>8} {:>8}",
        "budget", "eta", "r_eta", "r_bw", "r", "energy", "bytes"
    );
    for budget in [2_000, 8_000, 32_000] {
        for eta in [0.5, 0.9, 0.99] {
            let policy = RankPolicy {
                eta,
                b_max: budget,
                r_cap: 32,
            };
            let d = select_rank(&m, &policy, &SpectralConfig::default())?;
            println!(
                "{budget:>8} {eta:>6} {:>6} {:>6} {:>6} {:>8.4} {:>8}",
                d.r_eta,
                d.r_bandwidth,
                d.r_final,
                d.energy_covered,
                factor_bytes(128, 64, d.r_final)
            );
        }
    }
    Ok(())
}
