//! Split learning over a 100 Mbps link with adaptive low-rank compression,
//! against the same run with exact transfer.
//!
//!     cargo run --release --example split_learning

use nsc_core::sim::{Channel, SimConfig, Simulation};

fn main() -> nsc_core::Result<()> {
    let cfg = SimConfig {
        rounds: 60,
        ..SimConfig::default()
    };
    let mut compressed = Simulation::new(cfg.clone())?;
    let mut exact = Simulation::with_channel(cfg.clone(), Channel::Lossless)?;
    println!("per-tensor budget {} bytes", compressed.budget());
    println!(
        "{:>5} {:>9} {:>8} {:>9} {:>9} {:>6} {:>10}",
        "round", "loss", "acc", "exact acc", "up bytes", "rank", "time s"
    );
    for _ in 0..cfg.rounds {
        let c = compressed.run_round()?;
        let e = exact.run_round()?;
        if c.round % 10 == 9 {
            println!(
                "{:>5} {:>9.4} {:>8.4} {:>9.4} {:>9} {:>6.2} {:>10.5}",
                c.round,
                c.loss(),
                c.eval_acc,
                e.eval_acc,
                c.total_uplink(),
                c.mean_rank().unwrap_or(0.0),
                c.sim_time_s
            );
        }
    }
    Ok(())
}
