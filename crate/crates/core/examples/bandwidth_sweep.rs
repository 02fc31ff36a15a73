//! Reconstruction MSE of each compressor at 25, 50, 100 and 200 Mbps on a
//! planted-spectrum corpus.
//!
//!     cargo run --release --example bandwidth_sweep

use nsc_core::bench::{sweep, sweep_table, DEFAULT_BANDWIDTHS_MBPS};
use nsc_core::sim::SimConfig;
use nsc_core::CompressorKind;

fn main() -> nsc_core::Result<()> {
    let cfg = SimConfig::default();
    let rows = sweep(&cfg, &DEFAULT_BANDWIDTHS_MBPS, &CompressorKind::ALL)?;
    print!("{}", sweep_table(&rows));
    Ok(())
}
