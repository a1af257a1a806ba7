//! Builders for the two reference networks.

mod brunel;
mod microcircuit;

pub use brunel::{brunel_neuron, build_brunel, BrunelParams};
pub use microcircuit::{
    build_microcircuit, DelayStats, ExternalDrive, MicrocircuitMap, MicrocircuitParams,
    WeightOverride,
};

use crate::network::NeuronParameters;
use crate::{Error, Result};

/// External Poisson rate (Hz) at which the mean input alone drives the
/// free membrane exactly to threshold, for exponential current synapses.
///
/// The mean input current of `k_ext` sources at rate ν is `k_ext·ν·w·τs`,
/// which shifts the potential by that current times `τm/C`.
pub fn nu_thres(neuron: &NeuronParameters, k_ext: u32, w_ext: f64) -> Result<f64> {
    if !(w_ext > 0.0) {
        return Err(Error::UndefinedThreshold(format!(
            "external weight {w_ext} must be positive"
        )));
    }
    if k_ext == 0 {
        return Err(Error::UndefinedThreshold("no external inputs".into()));
    }
    let theta = neuron.v_thresh - neuron.v_rest;
    let per_ms = theta * neuron.c_m / (k_ext as f64 * w_ext * neuron.tau_syn_exc * neuron.tau_m);
    Ok(per_ms * 1000.0)
}

/// Round half up, as used for all population scaling.
pub(crate) fn scale_count(size: usize, factor: f64) -> usize {
    (size as f64 * factor + 0.5).floor() as usize
}
