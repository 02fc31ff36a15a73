//! Fast paths against the exact SVD on power-law matrices.
//!
//!     cargo run --release --example oracle_check

use nsc_core::bench::oracle_checks;
use nsc_core::RngSeed;

fn main() -> nsc_core::Result<()> {
    for r in oracle_checks(RngSeed(1), 8)? {
        println!(
            "{:<14} {:>3}x{:<3} r={:<2} measured {:.6e} oracle {:.6e} ratio {:.5}",
            r.check,
            r.rows,
            r.cols,
            r.rank,
            r.measured,
            r.oracle,
            r.ratio()
        );
    }
    Ok(())
}
