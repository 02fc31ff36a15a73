//! Estimate the leading singular values of a matrix with a randomized sketch
//! and compare them with the exact values.
//!
//!     cargo run --example spectral_estimate

use nsc_core::spectral::{estimate_spectrum, SpectralConfig};
use nsc_core::tensor::{exact_svd, planted};
use nsc_core::RngSeed;

fn main() -> nsc_core::Result<()> {
    let sigmas: Vec<f64> = (0..60).map(|i| 0.5f64.powi(i)).collect();
    let m = planted(120, 60, &sigmas, RngSeed(7));

    let cfg = SpectralConfig {
        probe_rank: 8,
        ..SpectralConfig::default()
    };
    let est = estimate_spectrum(&m, &cfg)?;
    let exact = exact_svd(&m)?;

    println!("{:>3} {:>14} {:>14} {:>10}", "i", "estimate", "exact", "rel err");
    for (i, (e, x)) in est.sigmas.iter().zip(&exact.s).enumerate() {
        println!("{i:>3} {e:>14.6e} {x:>14.6e} {:>10.2e}", (e - x).abs() / x);
    }
    Ok(())
}
