//! Push one matrix repeatedly through a low-rank compressor with residual
//! feedback. The running average of the reconstructions approaches the
//! matrix even though every single transmission is rank 2.
//!
//!     cargo run --example error_feedback

use nsc_core::oasa::{compress, decompress, ErrorState, OasaConfig, ResidualTarget};
use nsc_core::tensor::{planted, Mat};
use nsc_core::RngSeed;

fn main() -> nsc_core::Result<()> {
    let sigmas: Vec<f64> = (1..=24).map(|i| (i as f64).powf(-0.5)).collect();
    let m = planted(48, 24, &sigmas, RngSeed(5));

    for target in [ResidualTarget::Compensated, ResidualTarget::Original] {
        let mut state = ErrorState::new(48, 24);
        let mut sum = Mat::zeros(48, 24);
        println!("{target:?}, beta = 0");
        for k in 1..=50u64 {
            let cfg = OasaConfig {
                beta: 0.0,
                residual_target: target,
                seed: RngSeed(k),
                ..OasaConfig::default()
            };
            let c = compress(&m, 2, &cfg, &mut state, true, None)?;
            sum = &sum + &decompress(&c.factors);
            if [1, 2, 5, 10, 20, 50].contains(&k) {
                let avg = sum.scale(1.0 / k as f64);
                println!(
                    "  K = {k:>2}: |M - avg| / |M| = {:.4}",
                    (&m - &avg).fro_norm() / m.fro_norm()
                );
            }
        }
    }
    Ok(())
}
