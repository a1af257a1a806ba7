use std::path::Path;
use std::process::{Command, Output};

fn wafersim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wafersim"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bench_table_lists_reference_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = wafersim(dir.path(), &["bench", "--table"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("BrainScaleS-1                           162             <0.012\n"));
    assert!(text.contains("SpiNNaker                               0.9                0.6\n"));
}

#[test]
fn wafer_report_shows_default_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let o = wafersim(dir.path(), &["wafer", "report"]);
    assert!(o.status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("capacity_report.json")).unwrap()).unwrap();
    assert_eq!(report["available_circuits"], 196_608);
    assert_eq!(report["fan_in_limit"], 14_336);
}

#[test]
fn stage_by_stage_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = d.join("config.json");
    std::fs::write(
        &config,
        r#"{"simulation": {"duration": 300.0, "initial_v": {"type": "reset_to_threshold"}},
            "analysis": {"warmup": 100.0}}"#,
    )
    .unwrap();
    let cfg = config.to_str().unwrap();
    assert!(wafersim(d, &["--seed", "3", "build", "brunel", "--g", "5", "--eta", "2"]).status.success());
    let net = d.join("network.json");
    let o = wafersim(d, &["--seed", "3", "adapt", net.to_str().unwrap(), "--preset", "brunel"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("substitute"));
    let adapted = d.join("adapted.json");
    let o = wafersim(d, &["map", adapted.to_str().unwrap(), "--apply-loss"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mapped = d.join("mapped.json");
    let o = wafersim(d, &["--config", cfg, "--threads", "2", "simulate", mapped.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let spikes = d.join("spikes.bin");
    let o = wafersim(d, &["--config", cfg, "analyze", spikes.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("regime: "));
    for f in ["rates.csv", "histograms.csv", "analysis.json", "spikes.csv", "mapping.json"] {
        assert!(d.join(f).exists(), "{f}");
    }
}

#[test]
fn run_reuses_cached_mapping() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = d.join("run.json");
    std::fs::write(
        &config,
        r#"{"model": {"type": "brunel", "g": 5.0, "eta": 2.0},
            "adaptation": {"neuron_scale": 0.16664, "indegree_scale": 0.2688,
                "weight_compensation": "linear",
                "input_substitution": {"type": "poisson_pool", "pool_size": 2083, "samples_per_target": 200},
                "conductance_conversion": {"enabled": true},
                "min_tau_syn": 1.0, "seed": 0},
            "topology": {},
            "simulation": {"duration": 200.0},
            "seed": 9}"#,
    )
    .unwrap();
    let cfg = config.to_str().unwrap();
    let first = wafersim(d, &["--config", cfg, "run"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(stdout(&first).contains("mapping: computed"));
    let second = wafersim(d, &["--config", cfg, "run"]);
    assert!(stdout(&second).contains("mapping: cache hit"));
    let hashes = |o: &Output| stdout(o).lines().filter(|l| l.starts_with("simulate")).map(String::from).collect::<Vec<_>>();
    assert_eq!(hashes(&first), hashes(&second));
}

#[test]
fn exit_codes_follow_failure_kind() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Validation failure.
    let o = wafersim(d, &["build", "brunel", "--g", "-1"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    // Capacity failure: the full network on a single ASIC.
    assert!(wafersim(d, &["build", "brunel"]).status.success());
    let config = d.join("tiny.json");
    std::fs::write(&config, r#"{"topology": {"rows": 1, "cols": 1, "available_asics": 1}}"#).unwrap();
    let net = d.join("network.json");
    let o = wafersim(d, &["--config", config.to_str().unwrap(), "map", net.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    // Simulation diagnostic: a delay shorter than the time step.
    let o = wafersim(d, &["simulate", net.to_str().unwrap(), "--dt", "2.0", "--duration", "10"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}
