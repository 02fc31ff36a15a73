//! Benchmark drivers: the bandwidth x compressor sweep, ablation runs, exact
//! SVD comparisons and golden wire vectors.
//!
//! Bandwidths are decimal megabits (1 Mbps = 10^6 bit/s). A bandwidth maps
//! to a per-tensor byte budget through the configured slot:
//! `floor(mbps * 1e6 * slot_s / 8)`.

use std::path::Path;

use rayon::prelude::*;

use crate::compressor::{decompress, Compressor, CompressorKind};
use crate::error::{Error, Result};
use crate::oasa::{self, ErrorState, OasaConfig};
use crate::rank::{rank_for_energy, rank_for_energy_of_total};
use crate::sim::{run_experiment, write_atomic, Ablation, LinkModel, SimConfig};
use crate::spectral::{estimate_spectrum, SpectralConfig};
use crate::tensor::{exact_svd, planted, Mat, RngSeed};
use crate::wire;

pub const DEFAULT_BANDWIDTHS_MBPS: [f64; 4] = [25.0, 50.0, 100.0, 200.0];

pub fn budget_for_mbps(mbps: f64, slot_s: f64) -> usize {
    LinkModel {
        bandwidth_bps: mbps * 1e6,
        latency_s: 0.0,
    }
    .slot_budget(slot_s)
}

/// Planted-spectrum matrices shaped like cut-layer activations
/// (`batch_size x hidden`), singular values `sweep_decay^i`.
pub fn sweep_corpus(cfg: &SimConfig, seed: RngSeed) -> Vec<Mat> {
    let k = cfg.batch_size.min(cfg.hidden);
    let sigmas: Vec<f64> = (0..k).map(|i| cfg.sweep_decay.powi(i as i32)).collect();
    (0..cfg.sweep_corpus)
        .map(|j| planted(cfg.batch_size, cfg.hidden, &sigmas, seed.derive(j as u64)))
        .collect()
}

/// The compressor a sweep row uses: the configured settings for `kind`,
/// with the adaptive compressor's feedback loop off and `sweep_eta` as its
/// energy threshold.
pub fn sweep_compressor(cfg: &SimConfig, kind: CompressorKind) -> Compressor {
    let cfg = SimConfig {
        compressor: kind,
        ..cfg.clone()
    };
    match cfg.compressor() {
        Compressor::Nsc(mut p) => {
            p.ecl = false;
            p.eta = cfg.sweep_eta;
            Compressor::Nsc(p)
        }
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub compressor: CompressorKind,
    pub bandwidth_mbps: f64,
    pub budget_bytes: usize,
    /// `None` when the budget cannot hold the compressor's smallest payload.
    pub mean_mse: Option<f64>,
    pub mean_rank: Option<f64>,
    pub mean_body_bytes: Option<f64>,
}

/// Mean squared reconstruction error of one compressor over a corpus.
pub fn sweep_cell(cfg: &SimConfig, corpus: &[Mat], kind: CompressorKind, mbps: f64, seed: RngSeed) -> Result<SweepRow> {
    let compressor = sweep_compressor(cfg, kind);
    let budget = budget_for_mbps(mbps, cfg.slot_s);
    let mut row = SweepRow {
        compressor: kind,
        bandwidth_mbps: mbps,
        budget_bytes: budget,
        mean_mse: None,
        mean_rank: None,
        mean_body_bytes: None,
    };
    let (mut mse, mut rank, mut bytes) = (0.0, 0.0, 0.0);
    let mut ranked = false;
    for (j, m) in corpus.iter().enumerate() {
        let out = match compressor.compress(m, budget, seed.derive(j as u64)) {
            Ok(out) => out,
            Err(Error::BudgetTooSmall { .. }) => return Ok(row),
            Err(e) => return Err(e),
        };
        let back = decompress(&out.bytes)?;
        mse += (m - &back).fro_norm_sq() / (m.rows() * m.cols()) as f64;
        bytes += out.body_len() as f64;
        if let Some(r) = out.rank {
            rank += r as f64;
            ranked = true;
        }
    }
    let n = corpus.len() as f64;
    row.mean_mse = Some(mse / n);
    row.mean_body_bytes = Some(bytes / n);
    row.mean_rank = ranked.then_some(rank / n);
    Ok(row)
}

/// One row per (compressor, bandwidth), compressor-major, in input order.
/// Cells run on the rayon pool.
pub fn sweep(cfg: &SimConfig, bandwidths_mbps: &[f64], compressors: &[CompressorKind]) -> Result<Vec<SweepRow>> {
    if bandwidths_mbps.is_empty() || compressors.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one bandwidth and one compressor".into(),
        ));
    }
    if let Some(b) = bandwidths_mbps.iter().find(|b| b.is_nan() || **b <= 0.0) {
        return Err(Error::Config(format!("bandwidth {b} Mbps is not positive")));
    }
    cfg.validate()?;
    let corpus = sweep_corpus(cfg, cfg.seed().derive(10));
    let cells: Vec<(CompressorKind, f64)> = compressors
        .iter()
        .flat_map(|&k| bandwidths_mbps.iter().map(move |&b| (k, b)))
        .collect();
    let comp_seed = cfg.seed().derive(11);
    cells
        .par_iter()
        .map(|&(k, b)| sweep_cell(cfg, &corpus, k, b, comp_seed))
        .collect()
}

pub const SWEEP_COLUMNS: [&str; 6] = [
    "compressor",
    "bandwidth_mbps",
    "budget_bytes",
    "mean_mse",
    "mean_rank",
    "mean_payload_bytes",
];

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.compressor.name().to_string(),
            r.bandwidth_mbps.to_string(),
            r.budget_bytes.to_string(),
            opt(r.mean_mse),
            opt(r.mean_rank),
            opt(r.mean_body_bytes),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Compressors down, bandwidths across, MSE in the cells.
pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut bws: Vec<f64> = Vec::new();
    let mut kinds: Vec<CompressorKind> = Vec::new();
    for r in rows {
        if !bws.contains(&r.bandwidth_mbps) {
            bws.push(r.bandwidth_mbps);
        }
        if !kinds.contains(&r.compressor) {
            kinds.push(r.compressor);
        }
    }
    let mut out = format!("{:<10}", "mse");
    for b in &bws {
        out += &format!(" {:>12}", format!("{b} Mbps"));
    }
    out.push('\n');
    for k in kinds {
        out += &format!("{:<10}", k.name());
        for b in &bws {
            let cell = rows
                .iter()
                .find(|r| r.compressor == k && r.bandwidth_mbps == *b)
                .and_then(|r| r.mean_mse)
                .map(|v| format!("{v:.4e}"))
                .unwrap_or_else(|| "-".into());
            out += &format!(" {cell:>12}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub seed: u64,
    /// `full` or an ablation name.
    pub mode: String,
    pub final_eval_acc: f64,
    pub final_loss: f64,
    pub final_eval_loss: f64,
    pub mean_mse: f64,
    pub mean_fit_mse: f64,
}

/// Runs the full configuration and each ablation on seeds
/// `cfg.seed .. cfg.seed + seeds`. Rows are seed-major, `full` first.
pub fn ablate(cfg: &SimConfig, modes: &[Ablation], seeds: usize) -> Result<Vec<AblationRow>> {
    let mut jobs: Vec<(u64, Option<Ablation>)> = Vec::new();
    for s in 0..seeds as u64 {
        let seed = cfg.seed.wrapping_add(s);
        jobs.push((seed, None));
        jobs.extend(modes.iter().map(|&m| (seed, Some(m))));
    }
    jobs.par_iter()
        .map(|&(seed, mode)| {
            let mut c = SimConfig { seed, ..cfg.clone() };
            if let Some(m) = mode {
                c = c.with_ablation(m);
            }
            let rounds = run_experiment(&c)?;
            let last = rounds.last().expect("rounds >= 1");
            let n = rounds.len() as f64;
            Ok(AblationRow {
                seed,
                mode: mode.map(|m| m.name()).unwrap_or("full").to_string(),
                final_eval_acc: last.eval_acc,
                final_loss: last.loss(),
                final_eval_loss: last.eval_loss,
                mean_mse: rounds.iter().map(|r| r.mean_mse).sum::<f64>() / n,
                mean_fit_mse: rounds.iter().map(|r| r.mean_fit_mse).sum::<f64>() / n,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationSummary {
    pub mode: String,
    pub pairs: usize,
    /// Seeds where the full run's final accuracy is at least the ablation's.
    pub full_at_least: usize,
    /// Mean of `full - ablated` final accuracy.
    pub mean_acc_gap: f64,
}

pub fn summarize_ablation(rows: &[AblationRow]) -> Vec<AblationSummary> {
    let mut modes: Vec<&str> = Vec::new();
    for r in rows.iter().filter(|r| r.mode != "full") {
        if !modes.contains(&r.mode.as_str()) {
            modes.push(&r.mode);
        }
    }
    modes
        .into_iter()
        .map(|mode| {
            let gaps: Vec<f64> = rows
                .iter()
                .filter(|r| r.mode == mode)
                .filter_map(|a| {
                    rows.iter()
                        .find(|f| f.mode == "full" && f.seed == a.seed)
                        .map(|f| f.final_eval_acc - a.final_eval_acc)
                })
                .collect();
            AblationSummary {
                mode: mode.to_string(),
                pairs: gaps.len(),
                full_at_least: gaps.iter().filter(|g| **g >= 0.0).count(),
                mean_acc_gap: gaps.iter().sum::<f64>() / gaps.len().max(1) as f64,
            }
        })
        .collect()
}

pub fn ablation_csv(rows: &[AblationRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "seed",
        "mode",
        "final_eval_acc",
        "final_loss",
        "final_eval_loss",
        "mean_mse",
        "mean_fit_mse",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.mode.clone(),
            r.final_eval_acc.to_string(),
            r.final_loss.to_string(),
            r.final_eval_loss.to_string(),
            r.mean_mse.to_string(),
            r.mean_fit_mse.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub check: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub measured: f64,
    pub oracle: f64,
}

impl OracleRow {
    pub fn ratio(&self) -> f64 {
        if self.oracle == 0.0 {
            if self.measured == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            self.measured / self.oracle
        }
    }
}

/// Compares the fast paths against the exact SVD on power-law matrices:
/// OASA residual vs truncated-SVD residual, leading estimated singular value
/// vs exact, and estimated vs exact energy rank.
pub fn oracle_checks(seed: RngSeed, cases: usize) -> Result<Vec<OracleRow>> {
    let shapes = [(64, 48), (96, 64), (128, 96), (128, 128)];
    (0..cases)
        .into_par_iter()
        .map(|c| {
            let (m, n) = shapes[c % shapes.len()];
            let s = seed.derive(c as u64);
            let k = m.min(n);
            let sigmas: Vec<f64> = (1..=k).map(|i| (i as f64).powf(-1.5)).collect();
            let a = planted(m, n, &sigmas, s.derive(0));
            let svd = exact_svd(&a)?;
            let r = 4 + c % 12;
            let norm = a.fro_norm();

            let cfg = OasaConfig {
                seed: s.derive(1),
                ..OasaConfig::default()
            };
            let mut state = ErrorState::new(m, n);
            let got = oasa::compress(&a, r, &cfg, &mut state, false, None)?;
            let resid = (&a - &oasa::decompress(&got.factors)).fro_norm() / norm;

            let spec = SpectralConfig {
                probe_rank: 16,
                seed: s.derive(2),
                ..SpectralConfig::default()
            };
            let est = estimate_spectrum(&a, &spec)?;
            let eta = 0.99;
            let r_est = rank_for_energy_of_total(&est.sigmas, a.fro_norm_sq(), eta).unwrap_or(k);
            Ok(vec![
                OracleRow {
                    check: "oasa_residual",
                    rows: m,
                    cols: n,
                    rank: r,
                    measured: resid,
                    oracle: svd.tail_norm(r) / norm,
                },
                OracleRow {
                    check: "leading_sigma",
                    rows: m,
                    cols: n,
                    rank: r,
                    measured: est.sigmas[0],
                    oracle: svd.s[0],
                },
                OracleRow {
                    check: "energy_rank",
                    rows: m,
                    cols: n,
                    rank: r,
                    measured: r_est as f64,
                    oracle: rank_for_energy(&svd.s, eta) as f64,
                },
            ])
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect())
}

pub fn oracle_csv(rows: &[OracleRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["check", "rows", "cols", "rank", "measured", "oracle", "ratio"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.check.to_string(),
            r.rows.to_string(),
            r.cols.to_string(),
            r.rank.to_string(),
            r.measured.to_string(),
            r.oracle.to_string(),
            r.ratio().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

/// Writes every golden payload into `dir`.
pub fn emit_goldens(dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for (name, payload) in wire::golden_payloads() {
        write_atomic(&dir.join(name), &wire::encode(&payload)?)?;
        names.push(name.to_string());
    }
    Ok(names)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenCheck {
    pub name: &'static str,
    pub bytes_match: bool,
    pub decodes_equal: bool,
}

impl GoldenCheck {
    pub fn ok(&self) -> bool {
        self.bytes_match && self.decodes_equal
    }
}

/// Compares the files in `dir` against freshly encoded golden payloads.
pub fn verify_goldens(dir: &Path) -> Result<Vec<GoldenCheck>> {
    wire::golden_payloads()
        .into_iter()
        .map(|(name, payload)| {
            let on_disk =
                std::fs::read(dir.join(name)).map_err(|e| Error::Io(format!("{}: {e}", dir.join(name).display())))?;
            let fresh = wire::encode(&payload)?;
            // values travel as f32, so compare against the rounded payload
            let want = wire::decode(&fresh)?;
            Ok(GoldenCheck {
                name,
                bytes_match: on_disk == fresh,
                decodes_equal: wire::decode(&on_disk).is_ok_and(|p| p == want),
            })
        })
        .collect()
}
