//! Factorize a matrix at a fixed rank with alternating subspace iteration
//! and compare the residual with the truncated SVD.
//!
//!     cargo run --example oasa_compress

use nsc_core::oasa::{compress, decompress, ErrorState, OasaConfig};
use nsc_core::tensor::{exact_svd, planted};
use nsc_core::RngSeed;

fn main() -> nsc_core::Result<()> {
    let sigmas: Vec<f64> = (1..=48).map(|i| (i as f64).powf(-1.2)).collect();
    let m = planted(96, 48, &sigmas, RngSeed(11));
    let svd = exact_svd(&m)?;
    let norm = m.fro_norm();

    for r in [2, 4, 8, 16] {
        let mut state = ErrorState::new(96, 48);
        let c = compress(&m, r, &OasaConfig::default(), &mut state, false, None)?;
        let resid = (&m - &decompress(&c.factors)).fro_norm() / norm;
        let best = svd.tail_norm(r) / norm;
        println!(
            "rank {r:>2}: residual {resid:.5} optimum {best:.5} ratio {:.4} after {} iterations",
            resid / best,
            c.iters_used
        );
    }
    Ok(())
}
