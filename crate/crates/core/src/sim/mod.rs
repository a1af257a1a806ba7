//! Clock-driven simulation of LIF networks with exponential current- or
//! conductance-based synapses.

mod engine;
mod io;
mod poisson;
mod readout;

use serde::{Deserialize, Serialize};

use crate::hash::ContentHasher;
use crate::{Error, Result};

pub use engine::simulate;
pub use io::{read_spikes_binary, read_spikes_csv, write_spikes_binary, write_spikes_csv, write_traces_csv};
pub use poisson::{poisson_source, poisson_source_thinned, step_probability, THINNING_WARN};
pub use readout::readout_subset;

/// Initial membrane potential of every neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialV {
    #[default]
    Rest,
    /// Uniform in `[low, high)` (mV).
    Uniform { low: f64, high: f64 },
    /// Uniform between each neuron's reset and threshold.
    ResetToThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordingConfig {
    /// Populations whose spikes are kept; `None` records everything.
    pub populations: Option<Vec<String>>,
    /// Global neuron ids whose membrane potential is sampled every step.
    pub probes: Vec<u32>,
    pub max_probes: usize,
    /// Keep only this many uniformly chosen neurons.
    pub readout_limit: Option<usize>,
}

impl Default for RecordingConfig {
    fn default() -> Self {
        Self {
            populations: None,
            probes: Vec::new(),
            max_probes: 8,
            readout_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    /// Time step (ms).
    pub dt: f64,
    /// Biological duration (ms).
    pub duration: f64,
    pub seed: u64,
    pub initial_v: InitialV,
    pub recording: RecordingConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            duration: 1000.0,
            seed: 0,
            initial_v: InitialV::Rest,
            recording: RecordingConfig::default(),
        }
    }
}

impl SimulationConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt = {}", self.dt)));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidParameter(format!("duration = {}", self.duration)));
        }
        if self.recording.probes.len() > self.recording.max_probes {
            return Err(Error::InvalidParameter(format!(
                "{} membrane probes requested, at most {} allowed",
                self.recording.probes.len(),
                self.recording.max_probes
            )));
        }
        if let InitialV::Uniform { low, high } = self.initial_v {
            if !(low <= high) {
                return Err(Error::InvalidParameter(format!(
                    "initial V range [{low}, {high})"
                )));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }
}

/// Global neuron range of one population.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationRange {
    pub id: String,
    pub start: u32,
    pub end: u32,
}

/// Membrane potential of one neuron, one sample per step end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub neuron: u32,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeRecord {
    pub populations: Vec<PopulationRange>,
    /// Recorded global neuron ids, ascending.
    pub neurons: Vec<u32>,
    /// Spike times (ms) per recorded neuron, ascending.
    pub spikes: Vec<Vec<f64>>,
    pub duration: f64,
    pub dt: f64,
    /// Deliveries of network spikes to their synapses.
    pub internal_deliveries: u64,
    /// Deliveries of external (Poisson) events.
    pub external_deliveries: u64,
    pub deliveries: u64,
    /// Wall-clock time of the run (s).
    pub wall_time: f64,
    pub config_hash: String,
    pub traces: Vec<Trace>,
}

impl SpikeRecord {
    pub fn spike_count(&self) -> usize {
        self.spikes.iter().map(Vec::len).sum()
    }

    /// Total number of neurons in the simulated network.
    pub fn network_size(&self) -> u32 {
        self.populations.last().map_or(0, |p| p.end)
    }

    /// Population of a global neuron id.
    pub fn population_of(&self, neuron: u32) -> Option<&PopulationRange> {
        self.populations
            .iter()
            .find(|p| p.start <= neuron && neuron < p.end)
    }

    /// Indices into `neurons`/`spikes` of recorded members of a population.
    pub fn members(&self, population: &str) -> Result<std::ops::Range<usize>> {
        let p = self
            .populations
            .iter()
            .find(|p| p.id == population)
            .ok_or_else(|| Error::UnknownPopulation(population.to_string()))?;
        let a = self.neurons.partition_point(|&n| n < p.start);
        let b = self.neurons.partition_point(|&n| n < p.end);
        Ok(a..b)
    }

    /// Hash of everything except the wall time.
    pub fn content_hash(&self) -> String {
        let mut h = ContentHasher::new();
        h.str("spike-record");
        for p in &self.populations {
            h.str(&p.id).u64(p.start as u64).u64(p.end as u64);
        }
        h.u64(self.neurons.len() as u64);
        for (n, s) in self.neurons.iter().zip(&self.spikes) {
            h.u64(*n as u64).u64(s.len() as u64);
            for &t in s {
                h.f64(t);
            }
        }
        h.f64(self.duration)
            .f64(self.dt)
            .u64(self.internal_deliveries)
            .u64(self.external_deliveries)
            .u64(self.deliveries)
            .str(&self.config_hash);
        for t in &self.traces {
            h.u64(t.neuron as u64);
            for &v in &t.v {
                h.f64(v);
            }
        }
        h.finish()
    }
}

/// Ratio of emulated biological time to wall-clock time.
pub fn biological_speedup(bio_duration_s: f64, wall_duration_s: f64) -> Result<f64> {
    if !(wall_duration_s > 0.0) {
        return Err(Error::ZeroWallTime);
    }
    Ok(bio_duration_s / wall_duration_s)
}
