//! Experiment configuration: a flat TOML key/value file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compressor::{Compressor, CompressorKind, NscParams};
use crate::error::{Error, Result};
use crate::oasa::{OasaConfig, ResidualTarget};
use crate::spectral::{SpectralConfig, MAX_POWER_ITERS};
use crate::tensor::RngSeed;

/// Seed used when neither the config nor the command line sets one.
pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DownlinkRank {
    /// Downlink gradients run their own rank selection.
    #[default]
    Independent,
    /// Downlink gradients reuse the rank chosen for the matching uplink.
    ReuseUplink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    #[default]
    Original,
    Compensated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Error correction loop disabled.
    NoEcl,
    /// One alternating iteration per compression.
    SingleIteration,
    /// Random initial basis on every call.
    NoWarmStart,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::NoEcl, Ablation::SingleIteration, Ablation::NoWarmStart];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::NoEcl => "no_ecl",
            Ablation::SingleIteration => "single_iteration",
            Ablation::NoWarmStart => "no_warm_start",
        }
    }
}

impl std::str::FromStr for Ablation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation mode `{s}`")))
    }
}

/// Every key accepted in a config file, with its meaning. Printed by `nsc --help`.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("seed", "master seed for data, init and compression (default 20240917)"),
    ("n_clients", "number of clients (default 5)"),
    ("rounds", "training rounds (default 100)"),
    ("batch_size", "mini-batch rows per client per round (default 128)"),
    (
        "samples_per_client",
        "training samples held by each client (default 512)",
    ),
    ("eval_samples", "held-out evaluation samples (default 1000)"),
    ("d_in", "input features (default 32)"),
    (
        "hidden",
        "client output width, i.e. the cut-layer features (default 32)",
    ),
    ("hidden2", "server hidden width (default 32)"),
    ("classes", "number of classes (default 10)"),
    (
        "separation",
        "norm of each class mean; noise has unit variance (default 5.0)",
    ),
    ("learning_rate", "SGD step size for client and server (default 0.1)"),
    ("bandwidth_bps", "link bandwidth in bits per second (default 100e6)"),
    ("latency_s", "one-way link latency in seconds (default 0.05)"),
    (
        "slot_s",
        "per-tensor transmission slot; budget = bandwidth_bps * slot_s / 8 bytes (default 0.0005)",
    ),
    ("compressor", "nsc | randtopk | quant | fixedrank (default nsc)"),
    ("eta", "energy-coverage threshold in (0,1) (default 0.95)"),
    ("r_cap", "rank cap (default 32)"),
    (
        "oversampling",
        "extra sketch columns for spectral estimation (default 8)",
    ),
    (
        "power_iters",
        "power rounds for spectral estimation, 0..=8; 0 uses the raw sketch M*Omega (default 2)",
    ),
    ("beta", "residual feedback momentum in [0,1] (default 0.9)"),
    ("max_iters", "maximum alternating iterations (default 10)"),
    ("min_iters", "iterations before early stopping may trigger (default 2)"),
    ("patience", "stalled iterations tolerated before stopping (default 2)"),
    (
        "stall_tol",
        "relative residual improvement that counts as progress (default 1e-3)",
    ),
    (
        "residual_target",
        "original | compensated: residual folded into feedback (default original)",
    ),
    ("downlink_rank", "independent | reuse_uplink (default independent)"),
    (
        "topk_random_frac",
        "share of random-top-k entries drawn at random (default 0.1)",
    ),
    ("quant_max_bits", "widest quantizer code, 2..8 (default 8)"),
    ("fixed_rank", "rank of the fixed-rank compressor (default 8)"),
    (
        "fixed_rank_iters",
        "iterations of the fixed-rank compressor (default 1)",
    ),
    ("no_ecl", "ablation: disable the error correction loop (default false)"),
    (
        "single_iteration",
        "ablation: one alternating iteration (default false)",
    ),
    (
        "no_warm_start",
        "ablation: random initial basis every call (default false)",
    ),
    (
        "sweep_eta",
        "energy threshold used by `sweep`; near 1 so rank follows the budget (default 0.999999)",
    ),
    (
        "sweep_decay",
        "sweep corpus spectrum: sigma_i = sweep_decay^i, matrices batch_size x hidden (default 0.5)",
    ),
    ("sweep_corpus", "matrices per seed in the sweep corpus (default 4)"),
    ("output", "CSV output path (optional; --out overrides)"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub n_clients: usize,
    pub rounds: usize,
    pub batch_size: usize,
    pub samples_per_client: usize,
    pub eval_samples: usize,
    pub d_in: usize,
    pub hidden: usize,
    pub hidden2: usize,
    pub classes: usize,
    pub separation: f64,
    pub learning_rate: f64,
    pub bandwidth_bps: f64,
    pub latency_s: f64,
    pub slot_s: f64,
    pub compressor: CompressorKind,
    pub eta: f64,
    pub r_cap: usize,
    pub oversampling: usize,
    pub power_iters: usize,
    pub beta: f64,
    pub max_iters: usize,
    pub min_iters: usize,
    pub patience: usize,
    pub stall_tol: f64,
    pub residual_target: ResidualMode,
    pub downlink_rank: DownlinkRank,
    pub topk_random_frac: f64,
    pub quant_max_bits: u8,
    pub fixed_rank: usize,
    pub fixed_rank_iters: usize,
    pub no_ecl: bool,
    pub single_iteration: bool,
    pub no_warm_start: bool,
    pub sweep_eta: f64,
    pub sweep_decay: f64,
    pub sweep_corpus: usize,
    pub output: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: DEFAULT_SEED,
            n_clients: 5,
            rounds: 100,
            batch_size: 128,
            samples_per_client: 512,
            eval_samples: 1000,
            d_in: 32,
            hidden: 32,
            hidden2: 32,
            classes: 10,
            separation: 5.0,
            learning_rate: 0.1,
            bandwidth_bps: 100e6,
            latency_s: 0.05,
            slot_s: 0.0005,
            compressor: CompressorKind::Nsc,
            eta: 0.95,
            r_cap: 32,
            oversampling: 8,
            power_iters: 2,
            beta: 0.9,
            max_iters: 10,
            min_iters: 2,
            patience: 2,
            stall_tol: 1e-3,
            residual_target: ResidualMode::Original,
            downlink_rank: DownlinkRank::Independent,
            topk_random_frac: 0.1,
            quant_max_bits: 8,
            fixed_rank: 8,
            fixed_rank_iters: 1,
            no_ecl: false,
            single_iteration: false,
            no_warm_start: false,
            sweep_eta: 0.999_999,
            sweep_decay: 0.5,
            sweep_corpus: 4,
            output: None,
        }
    }
}

fn bad(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{field}`: {msg}"))
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<SimConfig> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<SimConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        SimConfig::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_prefix(&e))))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_clients", self.n_clients),
            ("rounds", self.rounds),
            ("batch_size", self.batch_size),
            ("samples_per_client", self.samples_per_client),
            ("eval_samples", self.eval_samples),
            ("d_in", self.d_in),
            ("hidden", self.hidden),
            ("hidden2", self.hidden2),
            ("r_cap", self.r_cap),
            ("max_iters", self.max_iters),
            ("patience", self.patience),
            ("fixed_rank", self.fixed_rank),
            ("fixed_rank_iters", self.fixed_rank_iters),
            ("sweep_corpus", self.sweep_corpus),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(bad(name, "must be >= 1"));
            }
        }
        if self.classes < 2 {
            return Err(bad("classes", "must be >= 2"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(bad("eta", format!("{} not in (0, 1)", self.eta)));
        }
        if !(self.sweep_eta > 0.0 && self.sweep_eta < 1.0) {
            return Err(bad("sweep_eta", format!("{} not in (0, 1)", self.sweep_eta)));
        }
        if !(self.sweep_decay > 0.0 && self.sweep_decay <= 1.0) {
            return Err(bad("sweep_decay", "not in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(bad("beta", format!("{} not in [0, 1]", self.beta)));
        }
        if self.min_iters > self.max_iters {
            return Err(bad("min_iters", "exceeds max_iters"));
        }
        if self.power_iters > MAX_POWER_ITERS {
            return Err(bad("power_iters", format!("exceeds cap {MAX_POWER_ITERS}")));
        }
        if self.stall_tol.is_nan() || self.stall_tol <= 0.0 {
            return Err(bad("stall_tol", "must be positive"));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("latency_s", self.latency_s),
            ("separation", self.separation),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(name, "must be finite and >= 0"));
            }
        }
        for (name, v) in [("bandwidth_bps", self.bandwidth_bps), ("slot_s", self.slot_s)] {
            if v.is_nan() || v <= 0.0 {
                return Err(bad(name, "must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.topk_random_frac) {
            return Err(bad("topk_random_frac", "not in [0, 1]"));
        }
        if !(2..=8).contains(&self.quant_max_bits) {
            return Err(bad("quant_max_bits", "not in 2..=8"));
        }
        Ok(())
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> SimConfig {
        match ablation {
            Ablation::NoEcl => self.no_ecl = true,
            Ablation::SingleIteration => self.single_iteration = true,
            Ablation::NoWarmStart => self.no_warm_start = true,
        }
        self
    }

    pub fn seed(&self) -> RngSeed {
        RngSeed(self.seed)
    }

    /// The compressor both directions use, with ablations applied.
    pub fn compressor(&self) -> Compressor {
        match self.compressor {
            CompressorKind::Nsc => {
                let iters = if self.single_iteration { 1 } else { self.max_iters };
                Compressor::Nsc(NscParams {
                    eta: self.eta,
                    r_cap: self.r_cap,
                    spectral: SpectralConfig {
                        oversampling: self.oversampling,
                        power_iters: self.power_iters,
                        ..SpectralConfig::default()
                    },
                    oasa: OasaConfig {
                        max_iters: iters,
                        min_iters: self.min_iters.min(iters),
                        beta: self.beta,
                        patience: self.patience,
                        stall_tol: self.stall_tol,
                        residual_target: match self.residual_target {
                            ResidualMode::Original => ResidualTarget::Original,
                            ResidualMode::Compensated => ResidualTarget::Compensated,
                        },
                        ..OasaConfig::default()
                    },
                    ecl: !self.no_ecl,
                    warm_start: !self.no_warm_start,
                })
            }
            CompressorKind::Randtopk => Compressor::RandTopK {
                random_frac: self.topk_random_frac,
            },
            CompressorKind::Quant => Compressor::Quant {
                max_bits: self.quant_max_bits,
            },
            CompressorKind::Fixedrank => Compressor::FixedRank {
                rank: self.fixed_rank,
                iters: self.fixed_rank_iters,
            },
        }
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(s) => s.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = SimConfig::default();
        c.validate().unwrap();
        assert_eq!(SimConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = SimConfig::from_toml_str("rounds = 7\ncompressor = \"quant\"\n").unwrap();
        assert_eq!(c.rounds, 7);
        assert_eq!(c.compressor, CompressorKind::Quant);
        assert_eq!(c.n_clients, 5);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = SimConfig::from_toml_str("bandwith_bps = 3\n").unwrap_err();
        assert!(err.to_string().contains("bandwith_bps"), "{err}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let err = SimConfig::from_toml_str("eta = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("`eta`"), "{err}");
        let err = SimConfig::from_toml_str("compressor = \"zip\"\n").unwrap_err();
        assert!(err.to_string().contains("compressor"), "{err}");
    }

    #[test]
    fn every_field_is_documented() {
        let keys: Vec<String> = toml::Table::try_from(SimConfig {
            output: Some("x.csv".into()),
            ..SimConfig::default()
        })
        .unwrap()
        .keys()
        .cloned()
        .collect();
        for k in &keys {
            assert!(CONFIG_KEYS.iter().any(|(name, _)| name == k), "undocumented key {k}");
        }
        assert_eq!(keys.len(), CONFIG_KEYS.len());
    }

    #[test]
    fn ablations_shape_the_compressor() {
        let c = SimConfig::default().with_ablation(Ablation::SingleIteration);
        let Compressor::Nsc(p) = c.compressor() else { panic!() };
        assert_eq!(p.oasa.max_iters, 1);
        let c = SimConfig::default().with_ablation(Ablation::NoEcl);
        let Compressor::Nsc(p) = c.compressor() else { panic!() };
        assert!(!p.ecl);
    }
}
