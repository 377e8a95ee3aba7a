use std::path::Path;
use std::process::{Command, Output};

fn netmimo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netmimo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn overhead_text() {
    let o = netmimo(&["overhead"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for needle in ["18.921", "719", "816", "2.45%", "18.80%", "0.61%", "4.68%"] {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }
}

#[test]
fn overhead_json() {
    let o = netmimo(&["--json", "overhead", "--interval", "10ms"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["packed_bits"], 816);
    assert_eq!(doc["analytic_bits"], 719);
    let rows = doc["overhead"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["interval_ms"], 10.0);
}

#[test]
fn pack_unpack_pack_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let payload = dir.path().join("a.csi");
    let fields = dir.path().join("fields.json");
    let again = dir.path().join("b.csi");

    let o = netmimo(&["--seed", "5", "codec-pack", "-o", path(&payload)]);
    assert_eq!(o.status.code(), Some(0));
    let first = std::fs::read_to_string(&payload).unwrap();
    assert!(first.starts_with("netmimo-csi v1 "));
    assert!(first.lines().next().unwrap().contains("bits=816"));
    // 816 bits = 102 bytes = 204 hex digits
    assert_eq!(first.lines().nth(1).unwrap().len(), 204);

    let o = netmimo(&["codec-unpack", "-i", path(&payload)]);
    assert_eq!(o.status.code(), Some(0));
    std::fs::write(&fields, &o.stdout).unwrap();

    let o = netmimo(&["codec-pack", "--fields", path(&fields), "-o", path(&again)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&again).unwrap(), first);
}

#[test]
fn corrupt_payload_is_a_decode_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csi");
    std::fs::write(&p, "netmimo-csi v1 m=6 n=2 ng=8 nc=38 b_phi=7 b_psi=9 bits=816\nzz\n").unwrap();
    assert_eq!(netmimo(&["codec-unpack", "-i", path(&p)]).status.code(), Some(4));
}

#[test]
fn usage_and_io_errors() {
    assert_eq!(netmimo(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(netmimo(&["overhead", "--interval", "fast"]).status.code(), Some(2));
    let o = netmimo(&["codec-unpack", "-i", "/nonexistent/payload.csi"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(!o.stderr.is_empty());
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        "codec-pack",
        "codec-unpack",
        "overhead",
        "simulate",
        "campaign",
        "calibrate-mcs",
        "trace-gen",
    ] {
        let o = netmimo(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(stdout(&o).contains("Usage"), "{sub}");
    }
    let v = netmimo(&["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(stdout(&v).contains("0.1.0"));
}

#[test]
fn calibrate_prints_table() {
    let o = netmimo(&["--json", "calibrate-mcs", "--gap-db", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let entries = doc["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 10);
    let t0 = entries[0]["sinr_threshold_db"].as_f64().unwrap();
    assert!((t0 - 10.19).abs() < 0.01, "{t0}");
}

#[test]
fn trace_generation_writes_a_loadable_trace() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("trace.json");
    let o = netmimo(&["trace-gen", "--doppler-hz", "4", "--count", "3", "-o", path(&p)]);
    assert_eq!(o.status.code(), Some(0));
    let trace = netmimo::channel::load_trace(std::fs::File::open(&p).unwrap()).unwrap();
    assert_eq!(trace.snapshots.len(), 3);
}

#[test]
fn small_campaign_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("campaign.json");
    let out = dir.path().join("report.csv");

    let o = netmimo(&["campaign", "--dump-config"]);
    assert_eq!(o.status.code(), Some(0));
    let mut cfg: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    cfg["scenarios"].as_array_mut().unwrap().truncate(1);
    cfg["mobility"].as_array_mut().unwrap().truncate(1);
    cfg["schemes"] = serde_json::json!(["tdma-mimo", "fr-simo"]);
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();

    let o = netmimo(&["campaign", "-c", path(&cfg_path), "--drops", "1", "-o", path(&out)]);
    assert!(matches!(o.status.code(), Some(0 | 3)), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(&out).unwrap();
    let mut lines = report.lines();
    assert!(lines.next().unwrap().starts_with("scenario,mobility,hardware"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn invalid_campaign_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"version": 99}"#).unwrap();
    assert_eq!(netmimo(&["campaign", "-c", path(&p)]).status.code(), Some(4));
}
