//! Encode the golden payloads and dump their bytes.
//!
//!     cargo run --example wire_format

use nsc_core::wire::{decode, encode, golden_payloads, PayloadHeader};

fn main() -> nsc_core::Result<()> {
    for (name, payload) in golden_payloads() {
        let bytes = encode(&payload)?;
        let header = PayloadHeader::parse(&bytes)?;
        println!(
            "{name}: {:?} {}x{} r_or_k={} ({} bytes)",
            header.tag,
            header.m,
            header.n,
            header.r_or_k,
            bytes.len()
        );
        for chunk in bytes.chunks(16) {
            let hex: Vec<String> = chunk.iter().map(|b| format!("{b:02x}")).collect();
            println!("  {}", hex.join(" "));
        }
        assert_eq!(encode(&decode(&bytes)?)?, bytes);
        println!("  decoded:\n{}", indent(&format!("{:?}", decode(&bytes)?.to_mat())));
    }
    Ok(())
}

fn indent(s: &str) -> String {
    s.lines().map(|l| format!("    {l}\n")).collect()
}
