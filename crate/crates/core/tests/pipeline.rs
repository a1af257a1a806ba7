use wafersim::hardware::WaferConfig;
use wafersim::pipeline::{run_pipeline, ModelConfig, PipelineConfig};
use wafersim::Error;

fn quick(seed: u64) -> PipelineConfig {
    let mut c = PipelineConfig::brunel(6.0, 4.0, seed);
    c.simulation.duration = 300.0;
    c.write_network = false;
    c
}

#[test]
fn rerun_hits_the_mapping_cache() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_pipeline(&quick(1), dir.path()).unwrap();
    let b = run_pipeline(&quick(1), dir.path()).unwrap();
    assert_eq!(a.cache_hit, Some(false));
    assert_eq!(b.cache_hit, Some(true));
    assert_eq!(a.stage_hashes, b.stage_hashes);
    assert!(dir.path().join("spikes.bin").exists());
    assert!(dir.path().join("analysis.json").exists());
}

#[test]
fn changing_external_rate_reuses_the_mapping() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_pipeline(&quick(2), dir.path()).unwrap();
    let mut c = quick(2);
    if let ModelConfig::Brunel(p) = &mut c.model {
        p.eta = 2.0;
    }
    let b = run_pipeline(&c, dir.path()).unwrap();
    assert_eq!(b.cache_hit, Some(true));
    assert_eq!(a.stage_hashes["map"], b.stage_hashes["map"]);
    assert_ne!(a.stage_hashes["simulate"], b.stage_hashes["simulate"]);
}

#[test]
fn changing_topology_remaps() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(&quick(3), dir.path()).unwrap();
    let mut c = quick(3);
    c.topology = Some(WaferConfig {
        route_capacity: 10,
        ..Default::default()
    });
    let b = run_pipeline(&c, dir.path()).unwrap();
    assert_eq!(b.cache_hit, Some(false));
}

#[test]
fn stage_errors_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = quick(4);
    c.topology = Some(WaferConfig {
        available_asics: Some(1),
        ..Default::default()
    });
    match run_pipeline(&c, dir.path()) {
        Err(e @ Error::Stage { stage: "map", .. }) => assert_eq!(e.exit_code(), 3),
        other => panic!("expected a map stage error, got {other:?}"),
    }
}

#[test]
fn config_document_round_trips() {
    let c = PipelineConfig::microcircuit(5);
    let text = serde_json::to_string(&c).unwrap();
    let back: PipelineConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, c);
    let minimal: PipelineConfig = serde_json::from_str(r#"{"model": {"type": "brunel", "g": 4.0}}"#).unwrap();
    assert!(minimal.adaptation.is_none() && minimal.topology.is_none());
}
