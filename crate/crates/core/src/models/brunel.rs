use serde::{Deserialize, Serialize};

use super::nu_thres;
use crate::network::{
    Connector, NetworkSpec, NeuronParameters, Population, Projection, Sign, Stimulus,
    StimulusKind, SynapseKind, Value,
};
use crate::{Error, Result};

/// Balanced random network parameters.
///
/// `w_exc` is the excitatory current amplitude; the default delivers a charge
/// equivalent to a 0.1 mV jump (`w·τs/C`) on the default neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BrunelParams {
    pub n_total: usize,
    pub exc_fraction: f64,
    pub p: f64,
    /// Relative inhibitory weight w_inh / w_exc.
    pub g: f64,
    /// External rate relative to the threshold rate.
    pub eta: f64,
    pub w_exc: f64,
    pub delay: f64,
    pub neuron: NeuronParameters,
}

pub fn brunel_neuron() -> NeuronParameters {
    NeuronParameters {
        tau_m: 20.0,
        tau_ref: 2.0,
        tau_syn_exc: 0.5,
        tau_syn_inh: 0.5,
        v_rest: -70.0,
        v_reset: -60.0,
        v_thresh: -50.0,
        e_rev_exc: 0.0,
        e_rev_inh: -80.0,
        c_m: 0.25,
        i_offset: 0.0,
    }
}

impl Default for BrunelParams {
    fn default() -> Self {
        let neuron = brunel_neuron();
        Self {
            n_total: 12_500,
            exc_fraction: 0.8,
            p: 0.1,
            g: 5.0,
            eta: 2.0,
            w_exc: 0.1 * neuron.c_m / neuron.tau_syn_exc,
            delay: 1.5,
            neuron,
        }
    }
}

impl BrunelParams {
    pub fn n_exc(&self) -> usize {
        (self.n_total as f64 * self.exc_fraction).round() as usize
    }

    /// External in-degree, equal to the excitatory recurrent in-degree.
    pub fn k_ext(&self) -> u32 {
        (self.p * self.n_exc() as f64).round() as u32
    }

    pub fn nu_thres(&self) -> Result<f64> {
        nu_thres(&self.neuron, self.k_ext(), self.w_exc)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.g >= 0.0) {
            return bad(format!("g = {} must be non-negative", self.g));
        }
        if !(self.eta >= 0.0) {
            return bad(format!("eta = {} must be non-negative", self.eta));
        }
        if !(self.exc_fraction > 0.0 && self.exc_fraction < 1.0) {
            return bad(format!("exc_fraction = {} outside (0, 1)", self.exc_fraction));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p = {} outside [0, 1]", self.p));
        }
        let n_exc = self.n_exc();
        if n_exc == 0 || n_exc >= self.n_total {
            return bad(format!("{} neurons cannot hold both populations", self.n_total));
        }
        if !(self.delay > 0.0) {
            return bad(format!("delay = {} must be positive", self.delay));
        }
        let v = self.neuron.violations(false);
        if !v.is_empty() {
            return bad(v.join("; "));
        }
        Ok(())
    }
}

/// Two populations, four recurrent projections and a Poisson drive of
/// `eta·ν_thres` per external input. The result is unsampled.
pub fn build_brunel(params: &BrunelParams, seed: u64) -> Result<NetworkSpec> {
    params.check()?;
    let n_exc = params.n_exc();
    let n_inh = params.n_total - n_exc;
    let mut spec = NetworkSpec::new(seed);
    spec.populations
        .push(Population::new("E", n_exc, Sign::Excitatory, params.neuron));
    spec.populations
        .push(Population::new("I", n_inh, Sign::Inhibitory, params.neuron));

    let w_inh = -params.g * params.w_exc;
    for (src, w) in [("E", params.w_exc), ("I", w_inh)] {
        for tgt in ["E", "I"] {
            spec.projections.push(Projection {
                id: format!("{src}->{tgt}"),
                source: src.into(),
                target: tgt.into(),
                connector: Connector::FixedProbability { p: params.p },
                weight: Value::constant(w),
                delay: Value::constant(params.delay),
                synapse: SynapseKind::CurrentExp,
                edges: None,
            });
        }
    }

    let k_ext = params.k_ext();
    let rate = if params.eta == 0.0 {
        0.0
    } else {
        params.eta * params.nu_thres()?
    };
    for tgt in ["E", "I"] {
        spec.stimuli.push(Stimulus {
            id: format!("ext->{tgt}"),
            target: tgt.into(),
            kind: StimulusKind::PoissonPerNeuron {
                rate,
                in_degree: k_ext,
                weight: params.w_exc,
            },
            synapse: SynapseKind::CurrentExp,
            edges: None,
        });
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::expected_synapses;

    #[test]
    fn complete_graph() {
        let mut spec = build_brunel(
            &BrunelParams {
                n_total: 100,
                p: 1.0,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        spec.sample().unwrap();
        assert_eq!(spec.total_synapses(), 9_900);
    }

    #[test]
    fn full_scale_expected_synapses() {
        let spec = build_brunel(&BrunelParams::default(), 0).unwrap();
        let expected = expected_synapses(&spec).unwrap();
        // 0.1 · 12500 · 12499; the quoted 15,625,000 is 0.1 · 12500²
        assert!((expected - 15_625_000.0).abs() / 15_625_000.0 < 1e-4, "{expected}");
        let spec = build_brunel(
            &BrunelParams {
                n_total: 12_400,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let expected = expected_synapses(&spec).unwrap();
        assert!((expected - 15_625_000.0).abs() / 15_625_000.0 < 0.02, "{expected}");
    }

    #[test]
    fn inhibitory_weights_are_g_times_excitatory() {
        for g in [0.0, 3.0, 6.5] {
            let mut spec = build_brunel(
                &BrunelParams {
                    n_total: 200,
                    g,
                    ..Default::default()
                },
                3,
            )
            .unwrap();
            spec.sample().unwrap();
            let w_exc = spec.projections[0].edges.as_ref().unwrap()[0].weight;
            for p in &spec.projections {
                for e in p.edges.as_ref().unwrap() {
                    if p.source == "I" {
                        assert!((e.weight.abs() - (g as f32 * w_exc).abs()).abs() < 1e-6);
                        assert!(e.weight <= 0.0);
                    } else {
                        assert_eq!(e.weight, w_exc);
                    }
                }
            }
        }
    }

    #[test]
    fn external_rate_is_eta_times_threshold_rate() {
        let params = BrunelParams {
            eta: 4.0,
            ..Default::default()
        };
        let spec = build_brunel(&params, 0).unwrap();
        let StimulusKind::PoissonPerNeuron { rate, in_degree, .. } = spec.stimuli[0].kind else {
            panic!()
        };
        assert_eq!(in_degree, 1000);
        assert!((rate - 40.0).abs() < 1e-9, "{rate}");
    }

    #[test]
    fn reproducible() {
        let params = BrunelParams {
            n_total: 500,
            ..Default::default()
        };
        let mut a = build_brunel(&params, 11).unwrap();
        let mut b = build_brunel(&params, 11).unwrap();
        a.sample().unwrap();
        b.sample().unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn invalid_parameters() {
        for p in [
            BrunelParams { g: -1.0, ..Default::default() },
            BrunelParams { eta: -0.1, ..Default::default() },
            BrunelParams { exc_fraction: 1.0, ..Default::default() },
        ] {
            assert!(matches!(build_brunel(&p, 0), Err(Error::InvalidParameter(_))));
        }
    }
}
