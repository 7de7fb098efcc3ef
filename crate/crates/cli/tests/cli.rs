use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrisk")).args(args).output().unwrap()
}

fn examples() -> String {
    format!("{}/../../docs/examples", env!("CARGO_MANIFEST_DIR"))
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Value column of a two-column `quantity,value` table.
fn quantity(table: &str, name: &str) -> f64 {
    table
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{name},")))
        .unwrap_or_else(|| panic!("{name} missing"))
        .parse()
        .unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(qrisk(&["classical"]).status.code(), Some(0));
    assert_eq!(qrisk(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(qrisk(&["qae", "--n-ae", "nope"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"items": [{"id": 1, "p": 1.5, "cost": 1}], "threshold": 1}"#).unwrap();
    let out = qrisk(&["classical", "--model", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));

    // 43 qubits is over the simulator budget.
    assert_eq!(qrisk(&["qae", "--n-ae", "30"]).status.code(), Some(3));
}

#[test]
fn classical_reports_the_toy_exceedance() {
    let dir = tempfile::tempdir().unwrap();
    let out = qrisk(&["classical", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let csv = read(dir.path(), "exceedance.csv");
    let row = csv.lines().nth(1).unwrap();
    let p: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert!((p - 0.0513).abs() < 1e-12, "{row}");
    assert!(dir.path().join("loss_distribution.csv").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn model_files_load() {
    let out = qrisk(&["classical", "--model", &format!("{}/supply_chain.json", examples())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("# exceedance"));
}

#[test]
fn qae_histogram_has_mirror_modes() {
    let dir = tempfile::tempdir().unwrap();
    let model = format!("{}/chain2.json", examples());
    let out = qrisk(&["qae", "--model", &model, "--n-ae", "4", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let hist = read(dir.path(), "qae_histogram.csv");
    assert_eq!(hist.lines().next(), Some("outcome,count,probability"));
    let mut rows: Vec<(String, f64)> = hist
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[2].parse().unwrap())
        })
        .collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1));
    // Outcome strings are LSB first and four bits wide.
    assert!(rows.iter().all(|(o, _)| o.len() == 4));
    let top = u32::from_str_radix(&rows[0].0.chars().rev().collect::<String>(), 2).unwrap();
    let second = u32::from_str_radix(&rows[1].0.chars().rev().collect::<String>(), 2).unwrap();
    assert_eq!((top + second) % 16, 0, "{rows:?}");
}

#[test]
fn resources_at_the_worked_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = qrisk(&[
        "resources", "--n-r", "150", "--n-t", "250", "--n-c", "10", "--n-ae", "10", "--n-params", "400", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let t = read(dir.path(), "resources.csv");
    assert_eq!(quantity(&t, "qubits_headline"), 179.0);
    assert!((quantity(&t, "gates_qae") / 2.6e6 - 1.0).abs() < 0.05);
    assert_eq!(quantity(&t, "grover_steps"), 15.0);
}

#[test]
fn seeded_runs_are_byte_identical_and_replayable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let r = tempfile::tempdir().unwrap();
    let model = format!("{}/chain3.json", examples());
    for d in [&a, &b] {
        let out = qrisk(&[
            "qae", "--model", &model, "--n-ae", "4", "--shots", "500", "--seed", "11", "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let out = qrisk(&["replay", a.path().to_str().unwrap(), "--out", r.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["qae_histogram.csv", "qae_decoded.csv", "manifest.json"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
        assert_eq!(read(a.path(), name), read(r.path(), name), "{name} after replay");
    }
    let manifest: serde_json::Value = serde_json::from_str(&read(a.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["command"], "qae");
}

#[test]
fn json_format_and_circuit_text() {
    let dir = tempfile::tempdir().unwrap();
    let out = qrisk(&["theory", "root", "--n", "3", "--k", "1", "--format", "json", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_str(&read(dir.path(), "root.json")).unwrap();
    assert!(!rows.as_array().unwrap().is_empty());

    let out = qrisk(&["circuit", "--kind", "rm"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("# circuit"));
}
