use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scale_count;
use crate::network::{
    Connector, NetworkSpec, NeuronParameters, Population, Projection, Sign, Stimulus,
    StimulusKind, SynapseKind, Value,
};
use crate::psp::weight_for_psp;
use crate::{Error, Result};

const BUNDLED_MAP: &str = include_str!("../../data/microcircuit_map.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightOverride {
    pub source: String,
    pub target: String,
    pub factor: f64,
}

/// Connectivity, sizes and synapse statistics of the eight-population
/// cortical microcircuit. `connectivity[target][source]` is a connection
/// probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrocircuitMap {
    pub version: u32,
    pub populations: Vec<String>,
    pub signs: Vec<Sign>,
    pub sizes: Vec<usize>,
    pub external_in_degrees: Vec<u32>,
    /// Background rate per population (Hz).
    pub external_rate: Vec<f64>,
    pub connectivity: Vec<Vec<f64>>,
    /// Mean excitatory PSP peak (mV).
    pub psp_exc: f64,
    /// Relative standard deviation of weights.
    pub psp_rel_sd: f64,
    /// Inhibitory weight magnitude relative to excitatory.
    pub relative_inhibition: f64,
    #[serde(default)]
    pub weight_overrides: Vec<WeightOverride>,
    pub delay_exc: DelayStats,
    pub delay_inh: DelayStats,
    pub neuron: NeuronParameters,
}

impl MicrocircuitMap {
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED_MAP).expect("bundled microcircuit map is valid")
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::MissingData {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    fn check(&self) -> Result<()> {
        let n = self.populations.len();
        let lens = [
            self.signs.len(),
            self.sizes.len(),
            self.external_in_degrees.len(),
            self.external_rate.len(),
            self.connectivity.len(),
        ];
        if lens.iter().any(|&l| l != n) || self.connectivity.iter().any(|r| r.len() != n) {
            return Err(Error::Format("microcircuit map has inconsistent dimensions".into()));
        }
        if self
            .connectivity
            .iter()
            .flatten()
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(Error::InvalidParameter(
                "connection probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Excitatory current amplitude (nA) giving the configured PSP peak.
    pub fn w_exc(&self) -> f64 {
        weight_for_psp(
            self.psp_exc,
            self.neuron.tau_m,
            self.neuron.tau_syn_exc,
            self.neuron.c_m,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExternalDrive {
    Poisson,
    LeakShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrocircuitParams {
    pub map: MicrocircuitMap,
    /// Neuron-count factor applied at build time (connection probabilities kept).
    pub scale: f64,
    pub external: ExternalDrive,
}

impl Default for MicrocircuitParams {
    fn default() -> Self {
        Self {
            map: MicrocircuitMap::bundled(),
            scale: 1.0,
            external: ExternalDrive::Poisson,
        }
    }
}

/// Eight populations, one projection per nonzero map entry, and background
/// drive either as per-neuron Poisson input or as an equivalent leak shift.
/// The result is unsampled.
pub fn build_microcircuit(params: &MicrocircuitParams, seed: u64) -> Result<NetworkSpec> {
    let map = &params.map;
    map.check()?;
    if !(params.scale > 0.0) {
        return Err(Error::InvalidParameter(format!("scale {} must be positive", params.scale)));
    }
    let mut spec = NetworkSpec::new(seed);
    for (i, name) in map.populations.iter().enumerate() {
        let size = scale_count(map.sizes[i], params.scale);
        if size == 0 {
            return Err(Error::DegenerateScale(name.clone()));
        }
        spec.populations
            .push(Population::new(name.clone(), size, map.signs[i], map.neuron));
    }

    let w = map.w_exc();
    for (t, row) in map.connectivity.iter().enumerate() {
        for (s, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let (src, tgt) = (&map.populations[s], &map.populations[t]);
            let factor = map
                .weight_overrides
                .iter()
                .filter(|o| &o.source == src && &o.target == tgt)
                .map(|o| o.factor)
                .product::<f64>();
            let (mean, delay) = match map.signs[s] {
                Sign::Excitatory => (w * factor, map.delay_exc),
                Sign::Inhibitory => (-map.relative_inhibition * w * factor, map.delay_inh),
            };
            spec.projections.push(Projection {
                id: format!("{src}->{tgt}"),
                source: src.clone(),
                target: tgt.clone(),
                connector: Connector::FixedProbability { p },
                weight: Value::Normal {
                    mean,
                    sd: (mean * map.psp_rel_sd).abs(),
                },
                delay: Value::Normal {
                    mean: delay.mean,
                    sd: delay.sd,
                },
                synapse: SynapseKind::CurrentExp,
                edges: None,
            });
        }
    }

    for (i, name) in map.populations.iter().enumerate() {
        let k = map.external_in_degrees[i];
        let rate = map.external_rate[i];
        let kind = match params.external {
            ExternalDrive::Poisson => StimulusKind::PoissonPerNeuron {
                rate,
                in_degree: k,
                weight: w,
            },
            ExternalDrive::LeakShift => StimulusKind::LeakShift {
                delta_v: mean_drive_shift(&map.neuron, k, rate, w),
                delta_i: 0.0,
            },
        };
        spec.stimuli.push(Stimulus {
            id: format!("bg->{name}"),
            target: name.clone(),
            kind,
            synapse: SynapseKind::CurrentExp,
            edges: None,
        });
    }
    Ok(spec)
}

/// Mean membrane shift (mV) of `k` Poisson inputs at `rate` Hz with current
/// amplitude `w` (nA) onto an excitatory exponential synapse.
pub(crate) fn mean_drive_shift(neuron: &NeuronParameters, k: u32, rate: f64, w: f64) -> f64 {
    k as f64 * rate / 1000.0 * w * neuron.tau_syn_exc * neuron.r_m()
}
