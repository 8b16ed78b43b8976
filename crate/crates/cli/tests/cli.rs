use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rnnt-memcost")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut all = vec!["--json"];
    all.extend_from_slice(args);
    let o = run(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY: &str = r#"{
    "_assumptions": ["small enough to run the cells"],
    "feature_dim": 6,
    "encoder": [
        {"kind": "LSTM", "hidden": 4, "layernorm": "FULL"},
        {"kind": "IS_2D_CIFG_R", "hidden": 2, "vec": 2, "layernorm": "CELL_ONLY", "residual": true},
        {"kind": "SRU", "hidden": 4}
    ],
    "reductions": [{"mode": "MEAN", "factor": 2, "position": 1}],
    "prediction": [{"kind": "CIFG_R", "hidden": 3}],
    "embed_dim": 3, "joint_dim": 5, "vocab": 7
}"#;

fn tiny_config(dir: &tempfile::TempDir) -> PathBuf {
    let p = dir.path().join("tiny.json");
    std::fs::write(&p, TINY).unwrap();
    p
}

#[test]
fn params_matches_hand_count() {
    // 8 LSTM layers, h=640, full LayerNorm: 4h(d+h) + 4h bias + 2(4h+h) LayerNorm.
    let h = 640u64;
    let layer = |d: u64| 4 * h * (d + h) + 4 * h + 2 * (4 * h + h);
    let dims = [80, 640, 1280, 640, 640, 1280, 640, 640];
    let encoder: u64 = dims.iter().map(|&d| layer(d)).sum();
    let v = json(&["params", path(&config("B"))]);
    assert_eq!(v["params"]["encoder"], encoder);
    assert_eq!(v["params"]["encoder"], 28_129_280);
    assert!(v["assumptions"].as_array().unwrap().len() >= 3);
    let gap = v["unattributed_remainder_m"]["encoder"].as_f64().unwrap();
    assert!((gap - (32.8 - 28.129_28)).abs() < 1e-9);
}

#[test]
fn params_table_carries_remainder_and_assumptions() {
    let o = run(&["--no-header", "params", path(&config("B"))]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("unattributed remainder"));
    assert!(s.contains("assumptions:"));
    assert!(!s.starts_with('#'));
    let with_header = stdout(&run(&["params", path(&config("B"))]));
    assert!(with_header.starts_with("# rnnt-memcost params"));
}

#[test]
fn bad_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"feature_dim\": ").unwrap();
    let o = run(&["params", path(&broken)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("malformed config"));

    let invalid = dir.path().join("invalid.json");
    std::fs::write(&invalid, TINY.replace("\"hidden\": 2, \"vec\": 2", "\"hidden\": 3, \"vec\": 2")).unwrap();
    let o = run(&["params", path(&invalid)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid model"));

    let o = run(&["params", "/nonexistent/model.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["analyze", path(&config("B")), "--buffer", "12XB"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analyze_degenerate_schedule_fetches_every_weight_every_frame() {
    let v = json(&["analyze", path(&config("B")), "--batch", "1", "--buffer", "0"]);
    let p = json(&["params", path(&config("B"))]);
    // Rate-weighted: layers 0-1 at 1, 2-4 at 1/2, 5-7 at 1/4.
    let layers: Vec<f64> =
        p["params"]["encoder_layers"].as_array().unwrap().iter().map(|l| {
            ["w_ih", "w_hh", "w_ch", "bias", "layernorm"].iter().map(|k| l[k].as_f64().unwrap()).sum()
        }).collect();
    let rates = [1.0, 1.0, 0.5, 0.5, 0.5, 0.25, 0.25, 0.25];
    let expect: f64 = layers.iter().zip(rates).map(|(n, r)| n * r).sum();
    assert_eq!(v["report"]["encoder"]["bytes_per_frame"].as_f64().unwrap(), expect);
}

#[test]
fn analyze_normalize_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("e7.csv");
    let v = json(&["analyze", path(&config("E7")), "--normalize", path(&config("B")), "--csv", path(&csv)]);
    let r = v["normalized"]["ratios"]["encoder bytes/frame"].as_f64().unwrap();
    assert!(r > 0.0 && r < 1.0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("layer,kind,rate,block,bytes_per_frame,pinned"));
    // Every E7 layer has an input and a recurrent row; plus the decoder row.
    assert_eq!(lines.count(), 12 * 2 + 1);
    assert!(text.contains("W_hh+W_ch"));
}

#[test]
fn buffer_accepts_param_budgets() {
    let v = json(&["analyze", path(&config("B")), "--buffer", "500Kparams", "--bpp", "4"]);
    assert_eq!(v["report"]["schedule"]["buffer_bytes"], 2_000_000);
    let v = json(&["analyze", path(&config("B")), "--buffer", "2MiB"]);
    assert_eq!(v["report"]["schedule"]["buffer_bytes"], 2_097_152);
}

#[test]
fn validate_passes_on_every_fixture() {
    for name in ["B", "E1", "E2", "E3", "E4", "E5", "E6", "E7"] {
        let o = run(&["--no-header", "validate", path(&config(name)), "--count-only"]);
        assert_eq!(o.status.code(), Some(0), "{name}");
        assert!(stdout(&o).contains("PASS"), "{name}");
    }
}

#[test]
fn validate_numeric_with_saved_weights() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(&dir);
    let stem = dir.path().join("w");
    let a = run(&["--no-header", "validate", path(&cfg), "--batch", "3", "--buffer", "64", "--frames", "12",
                  "--symbols", "2", "--seed", "5", "--save-weights", path(&stem)]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(stdout(&a).contains("numeric"));
    assert!(stdout(&a).contains("PASS"));
    let manifest = dir.path().join("w.json");
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["seed"], 5);
    let b = run(&["--no-header", "validate", path(&cfg), "--batch", "3", "--buffer", "64", "--frames", "12",
                  "--symbols", "2", "--seed", "5", "--weights", path(&manifest)]);
    assert_eq!(stdout(&a), stdout(&b));
    // Weights for another model are rejected as a user error.
    let o = run(&["validate", path(&config("E7")), "--weights", path(&manifest)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_misaligned_is_partial_batch() {
    let o = run(&["--no-header", "validate", path(&config("E1")), "--count-only", "--frames", "45"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("PARTIAL_BATCH"));
}

#[test]
fn corrupted_schedule_fails_naming_blocks() {
    let o = run(&["--no-header", "validate", path(&config("E7")), "--count-only", "--corrupt-schedule"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL: encoder[0].W_ih"));
}

#[test]
fn trace_out_sums_to_traced_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let v = json(&["validate", path(&config("E6")), "--count-only", "--trace-out", path(&out)]);
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["batch", "block", "fetches", "bytes", "pinned"]);
    let total: u64 = rdr.records().map(|r| r.unwrap()[3].parse::<u64>().unwrap()).sum();
    let t = &v["trace"];
    assert_eq!(total, t["encoder_bytes"].as_u64().unwrap() + t["decoder_bytes"].as_u64().unwrap());
}

#[test]
fn sweep_presets_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    run(&["sweep", path(&config("E5")), "--csv", path(&a)]);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(text.starts_with("point,batch,budget_params,buffer_bytes,bytes_per_frame,pinned_layers\n"));

    run(&["sweep", path(&config("B")), "--points", "grid", "--csv", path(&a)]);
    run(&["sweep", path(&config("B")), "--points", "grid", "--csv", path(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let mut rdr = csv::Reader::from_path(&a).unwrap();
    let rows: Vec<(u64, u64, f64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[1].parse().unwrap(), r[2].parse().unwrap(), r[4].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 9);
    for x in &rows {
        for y in &rows {
            if x.0 <= y.0 && x.1 <= y.1 {
                assert!(y.2 <= x.2, "{x:?} {y:?}");
            }
        }
    }
}

#[test]
fn whatif_tr_cases() {
    let v = json(&["whatif-tr", path(&config("E1")), "--factor", "4"]);
    assert!(v["reduction"].as_f64().unwrap() > 0.20);
    assert_eq!(v["same_weight_shapes"], true);
    let v = json(&["whatif-tr", path(&config("E1")), "--factor", "2"]);
    assert_eq!(v["reduction"].as_f64().unwrap(), 0.0);
    let o = run(&["whatif-tr", path(&config("B")), "--factor", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("weight shapes"));
}

#[test]
fn output_is_deterministic() {
    let (b, e7, e3, e2) = (config("B"), config("E7"), config("E3"), config("E2"));
    for args in [
        vec!["--no-header", "compare", path(&b), path(&e7)],
        vec!["--json", "analyze", path(&e3)],
        vec!["--no-header", "sweep", path(&e2), "--points", "grid"],
    ] {
        let a = run(&args);
        let b = run(&args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout);
    }
}
