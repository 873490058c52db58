use std::path::Path;
use std::process::{Command, Output};

fn grainmem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grainmem"))
        .args(args)
        .output()
        .expect("spawn grainmem")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = "epochs = 20\n[sbm]\nnodes_per_block = 20\n";

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    std::fs::write(&p, SMALL).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, format!("k = 3\n{SMALL}")).unwrap();
    let out = grainmem(&["partition", "--config", cfg.to_str().unwrap(), "--k", "4", "--l", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let h: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(h["first"].as_array().unwrap().len(), 4);

    let out = grainmem(&["partition", "--config", cfg.to_str().unwrap(), "--l", "1"]);
    let h: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(h["first"].as_array().unwrap().len(), 3);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(code(&grainmem(&["run", "--config", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&grainmem(&["run", "--tau", "9"])), 2);
    assert_eq!(code(&grainmem(&["run", "--regime", "sometimes"])), 2);
    assert_eq!(code(&grainmem(&["sweep", "--axis", "hidden", "--values", "1,2"])), 2);
    assert_eq!(code(&grainmem(&["run", "--bogus-flag"])), 2);
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    assert_eq!(code(&grainmem(&["run", "--dataset", missing.to_str().unwrap()])), 3);
    assert_eq!(code(&grainmem(&["audit", "--state", missing.to_str().unwrap()])), 3);
}

#[test]
fn gradcheck_passes() {
    let out = grainmem(&["gradcheck", "--seeds", "20"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("max relative error"));
    // an absurd tolerance turns the same run into a failed check
    assert_eq!(code(&grainmem(&["gradcheck", "--seeds", "5", "--tol", "0"])), 4);
}

#[test]
fn bootstrap_then_audit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let state = dir.path().join("state");
    let out = grainmem(&["bootstrap", "--config", &cfg, "--state", state.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(state.join("manifest.json").is_file());
    assert!(state.join("models/1_0.fgn").is_file());
    let out = grainmem(&["audit", "--state", state.to_str().unwrap()]);
    assert_eq!(code(&out), 0);

    // claim that a node some model trained on was forgotten
    let manifest_path = state.join("manifest.json");
    let mut manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    let ledger: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(state.join("ledger.json")).unwrap()).unwrap();
    let trained: u64 = ledger["1_0"].as_object().unwrap().keys().next().unwrap().parse().unwrap();
    manifest["forgotten"] = serde_json::json!([trained]);
    std::fs::write(&manifest_path, serde_json::to_string(&manifest).unwrap()).unwrap();
    let out = grainmem(&["audit", "--state", state.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
    assert!(stdout(&out).contains("forgotten node"));
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = grainmem(&[
            "run",
            "--config",
            &cfg,
            "--regime",
            "memory",
            "--fr",
            "2",
            "--ir",
            "3",
            "--timestamps",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(&a, "metrics.csv"), read(&b, "metrics.csv"));
    assert_eq!(read(&a, "events.jsonl"), read(&b, "events.jsonl"));
    let csv = String::from_utf8(read(&a, "metrics.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("0,") && rows[2].starts_with("2,"));
}

#[test]
fn sweep_has_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = grainmem(&["sweep", "--config", &cfg, "--axis", "tau", "--values", "0..3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = stdout(&out);
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",ok")));

    // more k-means centroids than nodes fails that row, not the sweep
    let out = grainmem(&["sweep", "--config", &cfg, "--method", "bekm", "--axis", "k", "--values", "2,100"]);
    assert_eq!(code(&out), 0);
    let csv = stdout(&out);
    assert!(csv.contains("\n2,") && csv.contains("100,,failed"), "{csv}");
}

#[test]
fn convert_writes_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let content = dir.path().join("toy.content");
    let cites = dir.path().join("toy.cites");
    std::fs::write(&content, "p1\t1\t0\tA\np2\t0\t1\tB\np3\t1\t1\tA\n").unwrap();
    std::fs::write(&cites, "p1\tp2\np2\tp1\np3\tp9\n").unwrap();
    let out_dir = dir.path().join("toy");
    let out = grainmem(&[
        "convert",
        "--content",
        content.to_str().unwrap(),
        "--cites",
        cites.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["nodes"], 3);
    assert_eq!(report["undirected_edges"], 1);
    assert_eq!(report["unknown_endpoints"], 1);
    assert!(out_dir.join("nodes.tsv").is_file() && out_dir.join("edges.tsv").is_file());
}
