//! Round loop: clients run in id order, each exchanging one compressed
//! activation matrix and one compressed gradient matrix with the server.

use std::io::Write;
use std::path::Path;

use log::{debug, info};

use super::config::{DownlinkRank, SimConfig};
use super::data::{make_synthetic_task, Shard, SyntheticTask, TaskSpec};
use super::link::LinkModel;
use super::model::{accuracy, ClientFront, ServerBack, ToyModel};
use crate::compressor::{decompress, CompressionStream, Compressor};
use crate::error::{Error, Result};
use crate::tensor::{Mat, RngSeed};

/// How matrices cross the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Channel {
    Compressed(Compressor),
    /// Raw `f64` values, 8 bytes per entry and no header. Exact transfer,
    /// used to check the split pipeline against the unsplit trainer.
    Lossless,
}

#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub front: ClientFront,
    pub uplink: CompressionStream,
    pub shard: Shard,
}

#[derive(Debug, Clone)]
pub struct ServerState {
    pub back: ServerBack,
    /// Indexed by client id.
    pub downlink: Vec<CompressionStream>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: usize,
    pub uplink_bytes: Vec<usize>,
    pub downlink_bytes: Vec<usize>,
    pub sim_time_s: f64,
    /// Server-side training loss per client, on the received activations.
    pub client_losses: Vec<f64>,
    /// Mean over clients of each client's model on the held-out set.
    pub eval_acc: f64,
    /// Mean over clients of the held-out cross-entropy.
    pub eval_loss: f64,
    pub mean_mse: f64,
    /// Mean squared error of each compressor against what it was asked to
    /// approximate (the feedback-compensated tensor when the error
    /// correction loop is on). Equals `mean_mse` without feedback.
    pub mean_fit_mse: f64,
    /// Ranks of every low-rank payload sent this round, uplink then downlink
    /// per client.
    pub ranks: Vec<usize>,
}

impl RoundMetrics {
    pub fn loss(&self) -> f64 {
        mean(&self.client_losses)
    }

    pub fn total_uplink(&self) -> usize {
        self.uplink_bytes.iter().sum()
    }

    pub fn total_downlink(&self) -> usize {
        self.downlink_bytes.iter().sum()
    }

    pub fn mean_rank(&self) -> Option<f64> {
        if self.ranks.is_empty() {
            return None;
        }
        Some(self.ranks.iter().sum::<usize>() as f64 / self.ranks.len() as f64)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

struct Transfer {
    received: Mat,
    bytes: usize,
    rank: Option<usize>,
    fit_mse: f64,
}

fn send(
    channel: Channel,
    stream: &mut CompressionStream,
    m: &Mat,
    budget: usize,
    rank: Option<usize>,
) -> Result<Transfer> {
    match channel {
        Channel::Lossless => Ok(Transfer {
            received: m.clone(),
            bytes: 8 * m.rows() * m.cols(),
            rank: None,
            fit_mse: 0.0,
        }),
        Channel::Compressed(_) => {
            let out = match rank {
                Some(r) => stream.compress_at_rank(m, budget, r)?,
                None => stream.compress(m, budget)?,
            };
            Ok(Transfer {
                received: decompress(&out.bytes)?,
                bytes: out.bytes.len(),
                rank: out.rank,
                fit_mse: out.fit_mse,
            })
        }
    }
}

fn mse(a: &Mat, b: &Mat) -> f64 {
    let d = a.try_sub(b).expect("same shape");
    d.fro_norm_sq() / (a.rows() * a.cols()) as f64
}

pub fn task_spec(cfg: &SimConfig) -> TaskSpec {
    TaskSpec {
        seed: cfg.seed().derive(1),
        n_clients: cfg.n_clients,
        samples_per_client: cfg.samples_per_client,
        eval_samples: cfg.eval_samples,
        d_in: cfg.d_in,
        classes: cfg.classes,
        separation: cfg.separation,
    }
}

/// Every client front starts from the same weights.
fn initial_model(cfg: &SimConfig) -> ToyModel {
    let seed = cfg.seed().derive(2);
    ToyModel {
        client: ClientFront::init(cfg.d_in, cfg.hidden, seed.derive(0)),
        server: ServerBack::init(cfg.hidden, cfg.hidden2, cfg.classes, seed.derive(1)),
    }
}

fn uplink_seed(cfg: &SimConfig, id: usize) -> RngSeed {
    cfg.seed().derive(3).derive(id as u64)
}

fn downlink_seed(cfg: &SimConfig, id: usize) -> RngSeed {
    cfg.seed().derive(4).derive(id as u64)
}

pub struct Simulation {
    cfg: SimConfig,
    channel: Channel,
    link: LinkModel,
    budget: usize,
    pub clients: Vec<ClientState>,
    pub server: ServerState,
    eval: Shard,
    round: usize,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Simulation> {
        let channel = Channel::Compressed(cfg.compressor());
        Simulation::with_channel(cfg, channel)
    }

    pub fn with_channel(cfg: SimConfig, channel: Channel) -> Result<Simulation> {
        let task = make_synthetic_task(&task_spec(&cfg));
        Simulation::with_task(cfg, channel, task)
    }

    /// Uses the given data instead of generating it from the config.
    pub fn with_task(cfg: SimConfig, channel: Channel, task: SyntheticTask) -> Result<Simulation> {
        cfg.validate()?;
        if task.shards.len() != cfg.n_clients {
            return Err(Error::Config(format!(
                "field `n_clients`: {} but the task has {} shards",
                cfg.n_clients,
                task.shards.len()
            )));
        }
        let model = initial_model(&cfg);
        let compressor = match channel {
            Channel::Compressed(c) => c,
            Channel::Lossless => cfg.compressor(),
        };
        let clients = task
            .shards
            .into_iter()
            .enumerate()
            .map(|(id, shard)| ClientState {
                id,
                front: model.client.clone(),
                uplink: CompressionStream::new(compressor, uplink_seed(&cfg, id)),
                shard,
            })
            .collect();
        let server = ServerState {
            back: model.server,
            downlink: (0..cfg.n_clients)
                .map(|id| CompressionStream::new(compressor, downlink_seed(&cfg, id)))
                .collect(),
        };
        let link = LinkModel {
            bandwidth_bps: cfg.bandwidth_bps,
            latency_s: cfg.latency_s,
        };
        Ok(Simulation {
            budget: link.slot_budget(cfg.slot_s),
            cfg,
            channel,
            link,
            clients,
            server,
            eval: task.eval,
            round: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Per-tensor payload body budget in bytes.
    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn run_round(&mut self) -> Result<RoundMetrics> {
        let n = self.clients.len();
        let mut m = RoundMetrics {
            round: self.round,
            uplink_bytes: Vec::with_capacity(n),
            downlink_bytes: Vec::with_capacity(n),
            sim_time_s: 0.0,
            client_losses: Vec::with_capacity(n),
            eval_acc: 0.0,
            eval_loss: 0.0,
            mean_mse: 0.0,
            mean_fit_mse: 0.0,
            ranks: Vec::new(),
        };
        let mut mse_sum = 0.0;
        let mut fit_sum = 0.0;
        for client in self.clients.iter_mut() {
            let id = client.id;
            let batch = client.shard.batch(self.round, self.cfg.batch_size);
            let a = client.front.forward(&batch.x);

            let up = send(self.channel, &mut client.uplink, &a, self.budget, None)
                .map_err(|e| e.in_stream(format!("client {id} uplink")))?;
            let step = self.server.back.forward_backward(&up.received, &batch.y);

            let reuse = match self.cfg.downlink_rank {
                DownlinkRank::ReuseUplink => up.rank,
                DownlinkRank::Independent => None,
            };
            let down = send(
                self.channel,
                &mut self.server.downlink[id],
                &step.grad_a,
                self.budget,
                reuse,
            )
            .map_err(|e| e.in_stream(format!("client {id} downlink")))?;

            let g = client.front.backward(&batch.x, &a, &down.received);
            client.front.layer.sgd(&g, self.cfg.learning_rate);
            self.server.back.sgd(&step.grads, self.cfg.learning_rate);

            mse_sum += mse(&a, &up.received) + mse(&step.grad_a, &down.received);
            fit_sum += up.fit_mse + down.fit_mse;
            m.ranks.extend(up.rank);
            m.ranks.extend(down.rank);
            let t = self.link.transfer_time(up.bytes) + self.link.transfer_time(down.bytes);
            m.sim_time_s = m.sim_time_s.max(t);
            m.uplink_bytes.push(up.bytes);
            m.downlink_bytes.push(down.bytes);
            m.client_losses.push(step.loss);
        }
        m.mean_mse = mse_sum / (2 * n) as f64;
        m.mean_fit_mse = fit_sum / (2 * n) as f64;
        (m.eval_acc, m.eval_loss) = self.evaluate();
        debug!(
            "round {} loss {:.5} acc {:.4} up {} down {}",
            m.round,
            m.loss(),
            m.eval_acc,
            m.total_uplink(),
            m.total_downlink()
        );
        self.round += 1;
        Ok(m)
    }

    /// Held-out accuracy and loss, averaged over the clients' models.
    pub fn evaluate(&self) -> (f64, f64) {
        let (mut acc, mut loss) = (0.0, 0.0);
        for c in &self.clients {
            let a = c.front.forward(&self.eval.x);
            acc += accuracy(&self.server.back.logits(&a), &self.eval.y);
            loss += self.server.back.loss(&a, &self.eval.y);
        }
        let n = self.clients.len() as f64;
        (acc / n, loss / n)
    }

    pub fn run(&mut self) -> Result<Vec<RoundMetrics>> {
        (0..self.cfg.rounds).map(|_| self.run_round()).collect()
    }
}

pub fn run_experiment(cfg: &SimConfig) -> Result<Vec<RoundMetrics>> {
    info!(
        "running {} rounds, {} clients, compressor {}",
        cfg.rounds,
        cfg.n_clients,
        cfg.compressor.name()
    );
    Simulation::new(cfg.clone())?.run()
}

/// Trains the composed model with the same data order and schedule as the
/// split simulation, without any link. Returns per-round, per-client losses.
pub fn unsplit_reference(cfg: &SimConfig) -> Vec<Vec<f64>> {
    let task = make_synthetic_task(&task_spec(cfg));
    let init = initial_model(cfg);
    let mut fronts = vec![init.client; cfg.n_clients];
    let mut server = init.server;
    let mut out = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let mut losses = Vec::with_capacity(cfg.n_clients);
        for (front, shard) in fronts.iter_mut().zip(&task.shards) {
            let batch = shard.batch(round, cfg.batch_size);
            let mut model = ToyModel {
                client: front.clone(),
                server,
            };
            let (loss, g) = model.gradients(&batch.x, &batch.y);
            model.client.layer.sgd(&g.client, cfg.learning_rate);
            model.server.sgd(&g.server, cfg.learning_rate);
            *front = model.client;
            server = model.server;
            losses.push(loss);
        }
        out.push(losses);
    }
    out
}

pub const CSV_COLUMNS: [&str; 8] = [
    "round",
    "loss",
    "eval_acc",
    "uplink_bytes",
    "downlink_bytes",
    "sim_time_s",
    "mean_rank",
    "mean_mse",
];

/// `mean_rank` is empty for compressors that send no rank.
pub fn metrics_csv(rows: &[RoundMetrics]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.round.to_string(),
            r.loss().to_string(),
            r.eval_acc.to_string(),
            r.total_uplink().to_string(),
            r.total_downlink().to_string(),
            r.sim_time_s.to_string(),
            r.mean_rank().map(|v| v.to_string()).unwrap_or_default(),
            r.mean_mse.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compressor::CompressorKind;

    fn small() -> SimConfig {
        SimConfig {
            n_clients: 3,
            rounds: 4,
            batch_size: 16,
            samples_per_client: 32,
            eval_samples: 60,
            d_in: 6,
            hidden: 8,
            hidden2: 8,
            classes: 3,
            ..SimConfig::default()
        }
    }

    #[test]
    fn byte_accounting_matches_payloads() {
        let mut sim = Simulation::new(small()).unwrap();
        let m = sim.run_round().unwrap();
        for (up, down) in m.uplink_bytes.iter().zip(&m.downlink_bytes) {
            let r = (up - 20) / (4 * (16 + 8));
            assert_eq!(*up, 20 + 4 * r * (16 + 8));
            assert!(*down >= 20 + 4 * (16 + 8));
        }
        assert_eq!(m.ranks.len(), 6);
    }

    #[test]
    fn lossless_matches_unsplit() {
        let cfg = small();
        let want = unsplit_reference(&cfg);
        let mut sim = Simulation::with_channel(cfg, Channel::Lossless).unwrap();
        for losses in want {
            let got = sim.run_round().unwrap().client_losses;
            for (g, w) in got.iter().zip(&losses) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let cfg = SimConfig {
            learning_rate: 0.0,
            ..small()
        };
        let mut sim = Simulation::new(cfg).unwrap();
        let fronts: Vec<_> = sim.clients.iter().map(|c| c.front.clone()).collect();
        let back = sim.server.back.clone();
        sim.run().unwrap();
        assert_eq!(sim.server.back, back);
        for (c, f) in sim.clients.iter().zip(&fronts) {
            assert_eq!(&c.front, f);
        }
    }

    #[test]
    fn budget_failure_names_stream() {
        let cfg = SimConfig {
            bandwidth_bps: 1e3,
            ..small()
        };
        let err = run_experiment(&cfg).unwrap_err();
        assert!(err.to_string().starts_with("stream client 0 uplink"), "{err}");
    }

    #[test]
    fn csv_is_deterministic_and_has_header() {
        let cfg = SimConfig {
            compressor: CompressorKind::Quant,
            ..small()
        };
        let a = metrics_csv(&run_experiment(&cfg).unwrap()).unwrap();
        let b = metrics_csv(&run_experiment(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("round,loss,eval_acc,uplink_bytes,downlink_bytes,sim_time_s,mean_rank,mean_mse\n"));
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(1).unwrap().contains(",,"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
