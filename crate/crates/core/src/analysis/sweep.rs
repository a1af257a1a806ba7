use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{analyze_record, AnalysisConfig, Regime};
use crate::adapt::{adapt_pipeline, AdaptationConfig};
use crate::hardware::{build_wafer, WaferConfig, WaferTopology};
use crate::mapper::{apply_loss, map_network, MappingResult};
use crate::models::{build_brunel, BrunelParams};
use crate::network::NetworkSpec;
use crate::sim::{simulate, InitialV, SimulationConfig};
use crate::{Error, Result};

pub const DEFAULT_G_VALUES: [f64; 6] = [2.0, 3.0, 4.0, 5.0, 6.0, 8.0];
pub const DEFAULT_ETA_VALUES: [f64; 5] = [0.5, 0.9, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub g_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    /// Base network; `g` and `eta` are overwritten per cell.
    pub brunel: BrunelParams,
    pub adaptation: AdaptationConfig,
    pub simulation: SimulationConfig,
    pub analysis: AnalysisConfig,
    /// Runs per cell with seeds `seed, seed + 1, ...`.
    pub repeats: usize,
    /// Map every cell onto this wafer and apply the synapse loss.
    pub wafer: Option<WaferConfig>,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            g_values: DEFAULT_G_VALUES.to_vec(),
            eta_values: DEFAULT_ETA_VALUES.to_vec(),
            brunel: BrunelParams::default(),
            adaptation: AdaptationConfig::brunel_hardware(0),
            simulation: SimulationConfig {
                duration: 2000.0,
                initial_v: InitialV::ResetToThreshold,
                ..Default::default()
            },
            analysis: AnalysisConfig::default(),
            repeats: 1,
            wafer: None,
            seed: 0,
        }
    }
}

/// Result of one simulation in a sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub seed: u64,
    pub rate_exc: f64,
    pub rate_inh: f64,
    pub cv: Option<f64>,
    pub synchrony: Option<f64>,
    pub regime: Regime,
    pub synapses: usize,
    pub deliveries: u64,
    pub wall_time: f64,
    pub record_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub g: f64,
    pub eta: f64,
    pub runs: Vec<CellRun>,
    pub mean_rate_exc: f64,
    /// Standard deviation over repeats (zero for a single run).
    pub sd_rate_exc: f64,
    pub mean_rate_inh: f64,
    pub sd_rate_inh: f64,
    pub cv: Option<f64>,
    pub synchrony: Option<f64>,
    pub regime: Option<Regime>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub g_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    /// Row-major: all `eta` values of the first `g`, then the next `g`.
    pub cells: Vec<SweepCell>,
    pub partial: bool,
}

impl SweepGrid {
    pub fn cell(&self, g: f64, eta: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.g == g && c.eta == eta)
    }
}

fn adapted_cell(config: &SweepConfig, g: f64, eta: f64, seed: u64) -> Result<NetworkSpec> {
    let params = BrunelParams {
        g,
        eta,
        ..config.brunel.clone()
    };
    let spec = build_brunel(&params, seed)?;
    let adaptation = AdaptationConfig {
        seed,
        ..config.adaptation.clone()
    };
    let (mut spec, _) = adapt_pipeline(&spec, &adaptation)?;
    if !spec.is_sampled() {
        spec.sample()?;
    }
    Ok(spec)
}

/// Builds, adapts, optionally prunes by a mapping, simulates and analyzes
/// one (g, η) network.
pub fn run_brunel_cell(
    config: &SweepConfig,
    g: f64,
    eta: f64,
    seed: u64,
    mapping: Option<(&MappingResult, &WaferTopology)>,
) -> Result<CellRun> {
    let mut spec = adapted_cell(config, g, eta, seed)?;
    if let Some((result, topology)) = mapping {
        result.check(&spec, topology)?;
        spec = apply_loss(&spec, result)?;
    }
    let sim = SimulationConfig {
        seed,
        ..config.simulation.clone()
    };
    let record = simulate(&spec, &sim)?;
    let a = analyze_record(&record, &config.analysis)?;
    Ok(CellRun {
        seed,
        rate_exc: a.rates.population("E").map_or(0.0, |p| p.mean),
        rate_inh: a.rates.population("I").map_or(0.0, |p| p.mean),
        cv: a.mean_cv,
        synchrony: a.synchrony,
        regime: a.regime,
        synapses: spec.total_synapses(),
        deliveries: record.deliveries,
        wall_time: record.wall_time,
        record_hash: record.content_hash(),
    })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn mean_opt(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = v.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Runs every (g, η) cell. Cells run concurrently on the current rayon
/// pool; a failing cell is recorded and marks the grid partial. When a
/// wafer is configured, one mapping per repeat seed is computed and reused
/// by all cells, since g and η only change weights and rates.
pub fn phase_sweep(config: &SweepConfig) -> Result<SweepGrid> {
    if config.g_values.is_empty() || config.eta_values.is_empty() {
        return Err(Error::InvalidParameter("sweep axes must be nonempty".into()));
    }
    let repeats = config.repeats.max(1);
    let seeds: Vec<u64> = (0..repeats as u64).map(|r| config.seed + r).collect();

    let topology = config.wafer.as_ref().map(build_wafer).transpose()?;
    let mappings: Option<Vec<MappingResult>> = match &topology {
        None => None,
        Some(t) => Some(
            seeds
                .iter()
                .map(|&s| {
                    let spec = adapted_cell(config, config.g_values[0], config.eta_values[0], s)?;
                    map_network(&spec, t, s)
                })
                .collect::<Result<_>>()?,
        ),
    };

    let jobs: Vec<(f64, f64)> = config
        .g_values
        .iter()
        .flat_map(|&g| config.eta_values.iter().map(move |&e| (g, e)))
        .collect();
    let cells: Vec<SweepCell> = jobs
        .par_iter()
        .map(|&(g, eta)| {
            let runs: Result<Vec<CellRun>> = seeds
                .iter()
                .enumerate()
                .map(|(r, &s)| {
                    let m = mappings
                        .as_ref()
                        .zip(topology.as_ref())
                        .map(|(m, t)| (&m[r], t));
                    run_brunel_cell(config, g, eta, s, m)
                })
                .collect();
            match runs {
                Ok(runs) => {
                    let exc: Vec<f64> = runs.iter().map(|r| r.rate_exc).collect();
                    let inh: Vec<f64> = runs.iter().map(|r| r.rate_inh).collect();
                    let (mean_rate_exc, sd_rate_exc) = mean_sd(&exc);
                    let (mean_rate_inh, sd_rate_inh) = mean_sd(&inh);
                    let cv = mean_opt(runs.iter().map(|r| r.cv));
                    let synchrony = mean_opt(runs.iter().map(|r| r.synchrony));
                    let overall = {
                        let n_e = config.brunel.exc_fraction;
                        n_e * mean_rate_exc + (1.0 - n_e) * mean_rate_inh
                    };
                    let regime = super::classify_regime(
                        overall,
                        cv,
                        synchrony.unwrap_or(0.0),
                        &config.analysis.thresholds,
                    );
                    SweepCell {
                        g,
                        eta,
                        runs,
                        mean_rate_exc,
                        sd_rate_exc,
                        mean_rate_inh,
                        sd_rate_inh,
                        cv,
                        synchrony,
                        regime: Some(regime),
                        error: None,
                    }
                }
                Err(e) => SweepCell {
                    g,
                    eta,
                    runs: Vec::new(),
                    mean_rate_exc: f64::NAN,
                    sd_rate_exc: f64::NAN,
                    mean_rate_inh: f64::NAN,
                    sd_rate_inh: f64::NAN,
                    cv: None,
                    synchrony: None,
                    regime: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let partial = cells.iter().any(|c| c.error.is_some());
    Ok(SweepGrid {
        g_values: config.g_values.clone(),
        eta_values: config.eta_values.clone(),
        cells,
        partial,
    })
}

/// Grid as CSV: `g,eta,mean_rate_exc,mean_rate_inh,cv,synchrony,regime`.
/// Failed cells have empty fields and the regime `error`.
pub fn write_sweep_csv(grid: &SweepGrid) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut out = String::from("g,eta,mean_rate_exc,mean_rate_inh,cv,synchrony,regime\n");
    for c in &grid.cells {
        match c.regime {
            Some(r) => out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.g,
                c.eta,
                c.mean_rate_exc,
                c.mean_rate_inh,
                opt(c.cv),
                opt(c.synchrony),
                r
            )),
            None => out.push_str(&format!("{},{},,,,,error\n", c.g, c.eta)),
        }
    }
    out
}
