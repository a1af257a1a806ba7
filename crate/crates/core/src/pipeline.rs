//! End-to-end runs from a single JSON configuration: build, adapt, map
//! (cached), simulate, analyze.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapt::{adapt_pipeline, AdaptationConfig};
use crate::analysis::{analyze_record, histograms_csv, rates_csv, AnalysisConfig, RecordAnalysis};
use crate::bench::{throughput_metrics, ThroughputReport};
use crate::hardware::{build_wafer, WaferConfig};
use crate::hash::hash_bytes;
use crate::mapper::{apply_loss, map_network, mapping_report, MappingResult};
use crate::models::{
    build_brunel, build_microcircuit, BrunelParams, ExternalDrive, MicrocircuitMap,
    MicrocircuitParams,
};
use crate::network::{write_network, NetworkSpec};
use crate::sim::{
    simulate, write_spikes_binary, write_spikes_csv, write_traces_csv, InitialV, SimulationConfig,
    SpikeRecord,
};
use crate::{Error, Result};

fn one() -> f64 {
    1.0
}

fn poisson() -> ExternalDrive {
    ExternalDrive::Poisson
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelConfig {
    Brunel(BrunelParams),
    Microcircuit {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "poisson")]
        external: ExternalDrive,
        /// Connectivity map replacing the bundled one.
        #[serde(default)]
        map_file: Option<PathBuf>,
    },
}

impl ModelConfig {
    pub fn build(&self, seed: u64) -> Result<NetworkSpec> {
        match self {
            ModelConfig::Brunel(p) => build_brunel(p, seed),
            ModelConfig::Microcircuit {
                scale,
                external,
                map_file,
            } => {
                let map = match map_file {
                    Some(path) => MicrocircuitMap::from_file(path)?,
                    None => MicrocircuitMap::bundled(),
                };
                build_microcircuit(
                    &MicrocircuitParams {
                        map,
                        scale: *scale,
                        external: *external,
                    },
                    seed,
                )
            }
        }
    }
}

/// One document configuring every stage. The top-level `seed` is used by
/// all stages and overrides the seeds inside the sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub model: ModelConfig,
    /// `None` runs the network unadapted.
    #[serde(default)]
    pub adaptation: Option<AdaptationConfig>,
    /// `None` skips mapping.
    #[serde(default)]
    pub topology: Option<WaferConfig>,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub seed: u64,
    /// Write the adapted network with its edge sidecar.
    #[serde(default = "yes")]
    pub write_network: bool,
}

fn yes() -> bool {
    true
}

impl PipelineConfig {
    /// Adapted balanced random network on the default wafer.
    pub fn brunel(g: f64, eta: f64, seed: u64) -> Self {
        Self {
            model: ModelConfig::Brunel(BrunelParams {
                g,
                eta,
                ..Default::default()
            }),
            adaptation: Some(AdaptationConfig::brunel_hardware(seed)),
            topology: Some(WaferConfig::default()),
            simulation: SimulationConfig {
                duration: 2000.0,
                initial_v: InitialV::ResetToThreshold,
                ..Default::default()
            },
            analysis: AnalysisConfig::default(),
            seed,
            write_network: true,
        }
    }

    /// Adapted cortical microcircuit on the default wafer, 10 s with the
    /// first second discarded.
    pub fn microcircuit(seed: u64) -> Self {
        Self {
            model: ModelConfig::Microcircuit {
                scale: 1.0,
                external: ExternalDrive::Poisson,
                map_file: None,
            },
            adaptation: Some(AdaptationConfig::microcircuit_hardware(seed)),
            topology: Some(WaferConfig::default()),
            simulation: SimulationConfig {
                duration: 10_000.0,
                initial_v: InitialV::ResetToThreshold,
                ..Default::default()
            },
            analysis: AnalysisConfig {
                warmup: 1000.0,
                ..Default::default()
            },
            seed,
            write_network: true,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::MissingData {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Everything a pipeline run produced.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub spec: NetworkSpec,
    pub mapping: Option<MappingResult>,
    /// `Some(true)` when the mapping came from the cache.
    pub cache_hit: Option<bool>,
    pub record: SpikeRecord,
    pub analysis: RecordAnalysis,
    pub throughput: ThroughputReport,
    /// Content hash of each stage's output.
    pub stage_hashes: BTreeMap<String, String>,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Summary<'a> {
    stage_hashes: &'a BTreeMap<String, String>,
    cache_hit: Option<bool>,
    neurons: usize,
    synapses: usize,
    synapses_lost: Option<usize>,
    regime: String,
    mean_rates: BTreeMap<&'a str, f64>,
    events_per_second: f64,
}

fn json_hash<T: Serialize>(v: &T) -> String {
    hash_bytes(&serde_json::to_vec(v).expect("serializable"))
}

/// Cache file of a mapping for this network structure, wafer and seed.
pub fn mapping_cache_path(out_dir: &Path, structure_hash: &str, topology_hash: &str, seed: u64) -> PathBuf {
    let key = hash_bytes(format!("{structure_hash}/{topology_hash}/{seed}").as_bytes());
    out_dir.join("cache").join(format!("mapping-{}.json", &key[..16]))
}

/// Runs all stages and writes their outputs to `out_dir`.
///
/// A mapping is looked up in `out_dir/cache` by the structure hash of the
/// adapted network, the topology hash and the seed. Weights and rates do
/// not enter the structure hash, so changing them reuses the mapping.
pub fn run_pipeline(config: &PipelineConfig, out_dir: &Path) -> Result<PipelineOutcome> {
    fs::create_dir_all(out_dir)?;
    let seed = config.seed;
    let mut hashes = BTreeMap::new();
    let mut artifacts = Vec::new();
    let write = |name: &str, data: &[u8], artifacts: &mut Vec<PathBuf>| -> Result<()> {
        let p = out_dir.join(name);
        fs::write(&p, data)?;
        artifacts.push(p);
        Ok(())
    };

    let built = config.model.build(seed).map_err(|e| e.in_stage("build"))?;
    hashes.insert("build".into(), built.content_hash());
    write("built.json", &serde_json::to_vec_pretty(&built)?, &mut artifacts)?;

    let adaptation = config
        .adaptation
        .clone()
        .map(|a| AdaptationConfig { seed, ..a })
        .unwrap_or_else(|| AdaptationConfig::identity(seed));
    let (mut spec, report) = adapt_pipeline(&built, &adaptation).map_err(|e| e.in_stage("adapt"))?;
    if !spec.is_sampled() {
        spec.sample().map_err(|e| e.in_stage("adapt"))?;
    }
    hashes.insert("adapt".into(), spec.content_hash());
    write("adaptation_report.json", &serde_json::to_vec_pretty(&report)?, &mut artifacts)?;
    write("adaptation_report.txt", report.to_text().as_bytes(), &mut artifacts)?;
    if config.write_network {
        let p = out_dir.join("network.json");
        write_network(&p, &spec)?;
        artifacts.push(p);
    }

    let (mut cache_hit, mut mapping) = (None, None);
    if let Some(wafer) = &config.topology {
        let stage = |e: Error| e.in_stage("map");
        let topology = build_wafer(wafer).map_err(stage)?;
        let cache = mapping_cache_path(out_dir, &spec.structure_hash(), &topology.content_hash(), seed);
        let cached: Option<MappingResult> = fs::read(&cache)
            .ok()
            .and_then(|b| serde_json::from_slice(&b).ok())
            .filter(|m: &MappingResult| m.seed == seed && m.check(&spec, &topology).is_ok());
        let result = match cached {
            Some(m) => {
                log::info!("mapping cache hit: {}", cache.display());
                cache_hit = Some(true);
                m
            }
            None => {
                let m = map_network(&spec, &topology, seed).map_err(stage)?;
                fs::create_dir_all(cache.parent().expect("cache dir"))?;
                fs::write(&cache, serde_json::to_vec(&m)?)?;
                cache_hit = Some(false);
                m
            }
        };
        artifacts.push(cache);
        let rep = mapping_report(&result, &topology);
        write("mapping_report.json", &serde_json::to_vec_pretty(&rep)?, &mut artifacts)?;
        hashes.insert("map".into(), json_hash(&result));
        spec = apply_loss(&spec, &result).map_err(stage)?;
        hashes.insert("apply_loss".into(), spec.content_hash());
        mapping = Some(result);
    }

    let sim = SimulationConfig {
        seed,
        ..config.simulation.clone()
    };
    let record = simulate(&spec, &sim).map_err(|e| e.in_stage("simulate"))?;
    hashes.insert("simulate".into(), record.content_hash());
    for (name, f) in [
        ("spikes.csv", write_spikes_csv as fn(&Path, &SpikeRecord) -> Result<()>),
        ("spikes.bin", write_spikes_binary),
    ] {
        let p = out_dir.join(name);
        f(&p, &record)?;
        artifacts.push(p);
    }
    if !record.traces.is_empty() {
        let p = out_dir.join("traces.csv");
        write_traces_csv(&p, &record.traces, record.dt)?;
        artifacts.push(p);
    }

    let analysis = analyze_record(&record, &config.analysis).map_err(|e| e.in_stage("analyze"))?;
    hashes.insert("analyze".into(), json_hash(&analysis));
    write("analysis.json", &serde_json::to_vec_pretty(&analysis)?, &mut artifacts)?;
    write("rates.csv", rates_csv(&record, &analysis.rates).as_bytes(), &mut artifacts)?;
    write("histograms.csv", histograms_csv(&analysis.histograms).as_bytes(), &mut artifacts)?;

    let throughput = throughput_metrics(&record).map_err(|e| e.in_stage("bench"))?;
    write("throughput.json", &serde_json::to_vec_pretty(&throughput)?, &mut artifacts)?;

    let summary = Summary {
        stage_hashes: &hashes,
        cache_hit,
        neurons: spec.total_neurons(),
        synapses: spec.total_synapses(),
        synapses_lost: mapping.as_ref().map(MappingResult::lost),
        regime: analysis.regime.to_string(),
        mean_rates: analysis
            .rates
            .populations
            .iter()
            .map(|p| (p.population.as_str(), p.mean))
            .collect(),
        events_per_second: throughput.events_per_second,
    };
    write("summary.json", &serde_json::to_vec_pretty(&summary)?, &mut artifacts)?;

    Ok(PipelineOutcome {
        spec,
        mapping,
        cache_hit,
        record,
        analysis,
        throughput,
        stage_hashes: hashes,
        artifacts,
    })
}
