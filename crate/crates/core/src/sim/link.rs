/// One-way link with fixed latency and bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    pub bandwidth_bps: f64,
    pub latency_s: f64,
}

impl LinkModel {
    /// Seconds to deliver `bytes`: latency plus serialization time.
    pub fn transfer_time(&self, bytes: usize) -> f64 {
        self.latency_s + 8.0 * bytes as f64 / self.bandwidth_bps
    }

    /// Bytes that fit in `slot_s` seconds of link time (latency ignored).
    pub fn slot_budget(&self, slot_s: f64) -> usize {
        (self.bandwidth_bps * slot_s / 8.0).floor() as usize
    }
}
