//! Full configuration against each ablation over paired seeds.
//!
//!     cargo run --release --example ablation

use nsc_core::bench::{ablate, summarize_ablation};
use nsc_core::sim::{Ablation, SimConfig};

fn main() -> nsc_core::Result<()> {
    let cfg = SimConfig {
        rounds: 60,
        ..SimConfig::default()
    };
    let rows = ablate(&cfg, &Ablation::ALL, 5)?;
    for r in &rows {
        println!(
            "seed {} {:<17} acc {:.4} loss {:.4}",
            r.seed, r.mode, r.final_eval_acc, r.final_loss
        );
    }
    for s in summarize_ablation(&rows) {
        println!(
            "{}: full >= ablated in {}/{}, mean gap {:+.4}",
            s.mode, s.full_at_least, s.pairs, s.mean_acc_gap
        );
    }
    Ok(())
}
