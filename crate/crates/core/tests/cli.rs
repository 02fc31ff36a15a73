use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nsc_core::sim::CONFIG_KEYS;

fn nsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsc")).args(args).output().unwrap()
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_lists_every_config_key() {
    let o = nsc(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    for (key, _) in CONFIG_KEYS {
        assert!(text.contains(key), "missing {key}");
    }
    for sub in ["run", "sweep", "ablate", "goldens", "oracle"] {
        assert!(text.contains(sub), "missing {sub}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(nsc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(nsc(&["run", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(nsc(&["run", "--compressor", "zip"]).status.code(), Some(1));
    assert_eq!(nsc(&["goldens"]).status.code(), Some(1));
}

#[test]
fn config_errors_exit_one_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "rounds = 2\neta = 2.0\n").unwrap();
    let o = nsc(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("field `eta`"), "{}", stderr(&o));

    let o = nsc(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn budget_failure_exits_two_and_names_the_stream() {
    let o = nsc(&["run", "--rounds", "1", "--bandwidth-mbps", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("client 0 uplink"), "{}", stderr(&o));
}

fn run_csv(dir: &Path, name: &str) -> Vec<u8> {
    let out = dir.join(name);
    let o = nsc(&["run", "--rounds", "3", "--seed", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    std::fs::read(out).unwrap()
}

#[test]
fn run_writes_identical_csv_twice() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_csv(dir.path(), "a.csv");
    let b = run_csv(dir.path(), "b.csv");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "round,loss,eval_acc,uplink_bytes,downlink_bytes,sim_time_s,mean_rank,mean_mse"
    );
    assert_eq!(lines.count(), 3);
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let out = dir.path().join("q.csv");
    std::fs::write(
        &cfg,
        format!("rounds = 2\ncompressor = \"quant\"\noutput = {:?}\n", out),
    )
    .unwrap();
    let o = nsc(&["run", "--config", cfg.to_str().unwrap(), "--rounds", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 5);
    // quant sends no rank
    assert!(text.lines().nth(1).unwrap().contains(",,"));
}

#[test]
fn goldens_verify_against_checked_in_files() {
    let o = nsc(&["goldens", "--verify", golden_dir().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let o = nsc(&["goldens", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for entry in std::fs::read_dir(golden_dir()).unwrap() {
        let entry = entry.unwrap();
        let fresh = std::fs::read(dir.path().join(entry.file_name())).unwrap();
        assert_eq!(fresh, std::fs::read(entry.path()).unwrap());
    }

    let victim = dir.path().join("topk_2x3_k3.bin");
    let mut bytes = std::fs::read(&victim).unwrap();
    bytes[24] ^= 0x40;
    std::fs::write(&victim, bytes).unwrap();
    let o = nsc(&["goldens", "--verify", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_prints_one_row_per_cell() {
    let o = nsc(&["sweep", "--bandwidth-mbps", "50,200", "--compressor", "nsc,quant"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].starts_with("compressor,bandwidth_mbps"));
    assert!(!stderr(&o).is_empty());
}

#[test]
fn ablate_and_oracle_write_csv() {
    let o = nsc(&["ablate", "--ablation", "no_ecl", "--seeds", "2", "--rounds", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout.clone()).unwrap().lines().count(), 5);
    assert!(stderr(&o).contains("no_ecl"));

    let o = nsc(&["oracle", "--cases", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout.clone()).unwrap().starts_with("check,"));
}
