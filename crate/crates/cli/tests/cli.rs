use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

use ssperm_core::runtime::{JobKind, JobSpec, Mode};
use ssperm_core::SessionConfig;

fn ssperm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssperm")).args(args).output().expect("spawn ssperm")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn write_config(dir: &Path, mode: Mode) -> std::path::PathBuf {
    let mut cfg = SessionConfig::deterministic(31);
    cfg.mode = mode;
    cfg.addresses.p0 = format!("127.0.0.1:{}", free_port());
    cfg.addresses.p1 = format!("127.0.0.1:{}", free_port());
    cfg.addresses.p2 = format!("127.0.0.1:{}", free_port());
    cfg.job = Some(JobSpec { kind: JobKind::DnnInfer, dim: 5, batch: 4, hidden: vec![3], steps: 1 });
    let p = dir.join(format!("{mode:?}.toml"));
    std::fs::write(&p, cfg.to_toml()).unwrap();
    p
}

#[test]
fn three_processes_match_local_run() {
    let dir = tempfile::tempdir().unwrap();
    let tcp = write_config(dir.path(), Mode::Tcp);
    let children: Vec<_> = ["p0", "p1", "p2"]
        .iter()
        .map(|r| {
            let out = dir.path().join(format!("{r}.json"));
            let child = Command::new(env!("CARGO_BIN_EXE_ssperm"))
                .args(["party", "--role", r, "--config", tcp.to_str().unwrap(), "--timeout", "30", "--out", out.to_str().unwrap()])
                .spawn()
                .unwrap();
            (child, out)
        })
        .collect();
    let outs: Vec<_> = children
        .into_iter()
        .map(|(mut c, out)| {
            assert!(c.wait().unwrap().success());
            json(&out)
        })
        .collect();

    let local_out = dir.path().join("local.json");
    let run = ssperm(&["run", "--config", tcp.to_str().unwrap(), "--out", local_out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let local = json(&local_out);
    assert_eq!(local["output"].as_array().unwrap().len(), 4);
    assert!(local["max_abs_error"].as_f64().unwrap() < 1e-3);
    for o in &outs {
        assert_eq!(o["output"], local["output"]);
    }
    assert_eq!(outs[1]["role"], "p1");
}

#[test]
fn bad_role_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), Mode::Tcp);
    let out = ssperm(&["party", "--role", "p3", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_fails() {
    let out = ssperm(&["run", "--config", "/nonexistent/ssperm.toml"]);
    assert!(!out.status.success());
}

#[test]
fn zero_batch_is_a_usage_error() {
    let out = ssperm(&["bench", "--model", "lr", "--batch", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_report_counts_traffic() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("report.json");
    let out = ssperm(&["bench", "--model", "custom", "--dim", "8", "--hidden", "4", "--batch", "3", "--infer", "--out", p.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&p);
    assert_eq!(r["arch"], "8-4-relu-1-sigmoid");
    assert!(r["traffic"]["online"]["payload_bits"].as_u64().unwrap() > 0);
    assert_eq!(r["traffic"]["reference"].as_array().unwrap().len(), 5);
    let cap = r["traffic"]["aggregates"].as_array().unwrap().iter().find(|a| a["name"] == "cap").unwrap();
    assert_eq!(cap["count"], 2);
}

#[test]
fn dcor_sim_writes_csv() {
    let out = ssperm(&["privacy", "dcor-sim", "--distributions", "normal", "--n", "40", "--d", "5", "--h", "5", "--repeats", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("distribution,method,dcor,ci_low,ci_high"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn perm_stats_enumerates() {
    let out = ssperm(&["privacy", "perm-stats", "--enumerate", "--n", "4", "--pairs", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let hdr = rdr.headers().unwrap().clone();
    let var = hdr.iter().position(|h| h == "variance").unwrap();
    let exact = hdr.iter().position(|h| h == "exact_variance").unwrap();
    let perms = hdr.iter().position(|h| h == "permutations").unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let (v, e): (f64, f64) = (rec[var].parse().unwrap(), rec[exact].parse().unwrap());
        assert!((v - e).abs() < 1e-12);
        assert_eq!(&rec[perms], "24");
    }
}

#[test]
fn perm_stats_rejects_large_enumeration() {
    let out = ssperm(&["privacy", "perm-stats", "--enumerate", "--n", "9", "--pairs", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_reports_every_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let ds = ssperm_core::nn::data::two_gaussians(120, 3, 4.0, 5);
    ssperm_core::nn::data::write_csv(&data, &ds).unwrap();
    let out_csv = dir.path().join("acc.csv");
    let out = ssperm(&[
        "train", "--data", data.to_str().unwrap(), "--arch", "3-4-relu-1-sigmoid", "--epochs", "3", "--lr", "0.5", "--batch-size", "16",
        "--compare-plaintext", "--out", out_csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epoch,train_accuracy,val_accuracy,plain_train_accuracy,plain_val_accuracy");
    assert_eq!(lines.len(), 5);
    let last: Vec<f64> = lines[4].split(',').map(|v| v.parse().unwrap()).collect();
    assert!(last[2] > 0.8, "{}", lines[4]);
    assert!((last[2] - last[4]).abs() <= 0.05);
}

#[test]
fn train_rejects_width_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(&data, "a,b,label\n1,2,0\n3,4,1\n").unwrap();
    let out = ssperm(&["train", "--data", data.to_str().unwrap(), "--arch", "5-1-sigmoid"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flip_test_is_near_half() {
    let out = ssperm(&["privacy", "flip-test", "--values", "-1.5,2,3", "--rounds", "2000"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["fraction"].as_f64().unwrap() - 0.5).abs() < 0.03);
}
