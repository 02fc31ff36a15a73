use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use log::info;

use nsc_core::bench::{self, DEFAULT_BANDWIDTHS_MBPS};
use nsc_core::sim::{self, Ablation, SimConfig, CONFIG_KEYS};
use nsc_core::{CompressorKind, Error, RngSeed};

#[derive(Parser)]
#[command(name = "nsc", version, about = "Adaptive low-rank compression for split learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat TOML config; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path. Stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one split-learning experiment and write per-round metrics.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        compressor: Option<CompressorKind>,
        /// Link bandwidth in decimal megabits per second.
        #[arg(long = "bandwidth-mbps")]
        bandwidth_mbps: Option<f64>,
        #[arg(long)]
        ablation: Option<Ablation>,
    },
    /// Reconstruction MSE of every compressor at every bandwidth.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, default 25,50,100,200.
        #[arg(long = "bandwidth-mbps", value_delimiter = ',')]
        bandwidth_mbps: Vec<f64>,
        /// Comma-separated, default all.
        #[arg(long, value_delimiter = ',')]
        compressor: Vec<CompressorKind>,
    },
    /// Full configuration against ablated variants over paired seeds.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// One mode; default all of no_ecl, single_iteration, no_warm_start.
        #[arg(long)]
        ablation: Option<Ablation>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
    },
    /// Write the golden wire vectors, or check a directory against them.
    Goldens {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        verify: Option<PathBuf>,
    },
    /// Compare the fast paths against the exact SVD.
    Oracle {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 24)]
        cases: usize,
    },
}

fn config_help() -> String {
    let width = CONFIG_KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys (flat TOML, `key = value`):\n");
    for (k, doc) in CONFIG_KEYS {
        s += &format!("  {k:<width$}  {doc}\n");
    }
    s += "\nExit codes: 0 success, 1 usage or config error, 2 runtime error.\n";
    s += "Log level: NSC_LOG=error|warn|info|debug|trace.\n";
    s
}

fn load(common: &Common) -> Result<SimConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(r) = common.rounds {
        cfg.rounds = r;
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    match out {
        Some(p) => {
            sim::write_atomic(p, bytes)?;
            info!("wrote {}", p.display());
            Ok(())
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run {
            common,
            compressor,
            bandwidth_mbps,
            ablation,
        } => {
            let mut cfg = load(&common)?;
            if let Some(c) = compressor {
                cfg.compressor = c;
            }
            if let Some(b) = bandwidth_mbps {
                cfg.bandwidth_bps = b * 1e6;
            }
            if let Some(a) = ablation {
                cfg = cfg.with_ablation(a);
            }
            cfg.validate()?;
            let rows = sim::run_experiment(&cfg)?;
            let out = common.out.or(cfg.output.clone());
            emit(out.as_deref(), &sim::metrics_csv(&rows)?)
        }
        Command::Sweep {
            common,
            bandwidth_mbps,
            compressor,
        } => {
            let cfg = load(&common)?;
            let bws = if bandwidth_mbps.is_empty() {
                DEFAULT_BANDWIDTHS_MBPS.to_vec()
            } else {
                bandwidth_mbps
            };
            let kinds = if compressor.is_empty() {
                CompressorKind::ALL.to_vec()
            } else {
                compressor
            };
            let rows = bench::sweep(&cfg, &bws, &kinds)?;
            eprint!("{}", bench::sweep_table(&rows));
            let out = common.out.or(cfg.output.clone());
            emit(out.as_deref(), &bench::sweep_csv(&rows)?)
        }
        Command::Ablate {
            common,
            ablation,
            seeds,
        } => {
            let cfg = load(&common)?;
            cfg.validate()?;
            let modes = match ablation {
                Some(a) => vec![a],
                None => Ablation::ALL.to_vec(),
            };
            let rows = bench::ablate(&cfg, &modes, seeds)?;
            for s in bench::summarize_ablation(&rows) {
                eprintln!(
                    "{}: full >= ablated in {}/{} seeds, mean accuracy gap {:+.4}",
                    s.mode, s.full_at_least, s.pairs, s.mean_acc_gap
                );
            }
            let out = common.out.or(cfg.output.clone());
            emit(out.as_deref(), &bench::ablation_csv(&rows)?)
        }
        Command::Goldens { out, verify } => {
            if out.is_none() && verify.is_none() {
                return Err(Error::Config("goldens needs --out DIR or --verify DIR".into()));
            }
            if let Some(dir) = out {
                for name in bench::emit_goldens(&dir)? {
                    println!("wrote {}", dir.join(name).display());
                }
            }
            if let Some(dir) = verify {
                let checks = bench::verify_goldens(&dir)?;
                for c in &checks {
                    println!("{} {}", if c.ok() { "ok  " } else { "FAIL" }, c.name);
                }
                if !checks.iter().all(|c| c.ok()) {
                    return Err(Error::Malformed("golden vectors differ".into()));
                }
            }
            Ok(())
        }
        Command::Oracle { out, seed, cases } => {
            let seed = RngSeed(seed.unwrap_or(sim::DEFAULT_SEED));
            let rows = bench::oracle_checks(seed, cases)?;
            emit(out.as_deref(), &bench::oracle_csv(&rows)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("NSC_LOG", "warn")).init();
    let cli = match parse_cli() {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

/// Usage errors exit 1; `--help` and `--version` exit 0.
fn parse_cli() -> Result<Cli, ExitCode> {
    let help = config_help();
    Cli::command()
        .after_help(help)
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m))
        .map_err(|e| {
            let _ = e.print();
            if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        })
}
