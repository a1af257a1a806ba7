mod common;

use std::collections::BTreeMap;

use wafersim::adapt::{
    adapt_pipeline, clamp_time_constants, convert_current_to_conductance, downscale,
    replace_input_with_leak_shift, scale_weights_linear,
    AdaptationConfig,
};
use wafersim::models::{build_brunel, BrunelParams};
use wafersim::network::{
    in_degree_stats, Connector, NetworkSpec, Population, Projection, Sign, Stimulus, StimulusKind,
    SynapseKind, Value,
};
use wafersim::psp::weight_for_psp;
use wafersim::sim::{simulate, InitialV, SimulationConfig};

#[test]
fn rk4_oracle_agrees_with_closed_form() {
    let p = common::neuron();
    let w = weight_for_psp(0.5, p.tau_m, 2.0, p.c_m);
    let peak = common::rk4_current_psp(w, p.tau_m, 2.0, p.c_m);
    assert!((peak - 0.5).abs() < 1e-4, "{peak}");
}

#[test]
fn converted_psp_matches_at_mean_voltage() {
    // 0.5 mV excitatory PSP at -58 mV, reversal 0 mV.
    let mut p = common::neuron();
    p.tau_syn_exc = 2.0;
    p.tau_syn_inh = 2.0;
    for (sign, psp) in [(Sign::Excitatory, 0.5), (Sign::Inhibitory, -0.5)] {
        let w = weight_for_psp(psp, p.tau_m, 2.0, p.c_m);
        let mut spec = NetworkSpec::new(0);
        spec.populations.push(Population::new("S", 1, sign, p));
        spec.populations.push(Population::new("T", 1, Sign::Excitatory, p));
        spec.projections.push(Projection {
            id: "ST".into(),
            source: "S".into(),
            target: "T".into(),
            connector: Connector::FixedProbability { p: 1.0 },
            weight: Value::constant(w),
            delay: Value::constant(1.0),
            synapse: SynapseKind::CurrentExp,
            edges: None,
        });
        spec.sample().unwrap();
        let v_map = BTreeMap::from([("T".to_string(), -58.0)]);
        let conv = convert_current_to_conductance(&spec, &v_map).unwrap().spec;
        let g = conv.projections[0].edges.as_ref().unwrap()[0].weight as f64;
        assert!(g > 0.0);
        let peak = common::rk4_conductance_psp(g, p.tau_m, 2.0, p.c_m, -58.0, p.e_rev(sign));
        assert!((peak / psp - 1.0).abs() < 0.02, "{sign:?}: {peak} vs {psp}");
    }
}

#[test]
fn randomized_conversion_and_clamp_keep_peaks() {
    for seed in 0..20 {
        let (orig, adapted) = common::psp_case(seed);
        assert!((adapted / orig - 1.0).abs() < 0.02, "seed {seed}: {adapted} vs {orig}");
    }
}

#[test]
fn clamping_half_millisecond_synapse_keeps_peak() {
    let p = common::neuron();
    let w = weight_for_psp(0.3, p.tau_m, 0.5, p.c_m);
    let mut spec = NetworkSpec::new(0);
    spec.populations.push(Population::new("E", 2, Sign::Excitatory, p));
    spec.projections.push(Projection {
        id: "EE".into(),
        source: "E".into(),
        target: "E".into(),
        connector: Connector::FixedProbability { p: 1.0 },
        weight: Value::constant(w),
        delay: Value::constant(1.0),
        synapse: SynapseKind::CurrentExp,
        edges: None,
    });
    spec.sample().unwrap();
    let out = clamp_time_constants(&spec, 1.0).unwrap().spec;
    let q = out.populations[0].params;
    assert_eq!(q.tau_syn_exc, 1.0);
    let w2 = out.projections[0].edges.as_ref().unwrap()[0].weight as f64;
    let peak = common::rk4_current_psp(w2, q.tau_m, 1.0, q.c_m);
    assert!((peak / 0.3 - 1.0).abs() < 0.02, "{peak}");
}

#[test]
fn pool_substitution_preserves_flux() {
    let f = common::pool_flux(20);
    assert!((f.before - f.expected).abs() < 3.0 * f.se_before, "{f:?}");
    assert!((f.after - f.expected).abs() < 3.0 * f.se_after, "{f:?}");
}

#[test]
fn leak_shift_matches_mean_voltage_under_poisson_drive() {
    let mut spec = NetworkSpec::new(4);
    let mut p = common::neuron();
    p.v_thresh = 1000.0;
    spec.populations.push(Population::new("N", 8, Sign::Excitatory, p));
    spec.stimuli.push(Stimulus {
        id: "ext".into(),
        target: "N".into(),
        kind: StimulusKind::PoissonPerNeuron {
            rate: 8.0,
            in_degree: 2000,
            weight: 0.015,
        },
        synapse: SynapseKind::CurrentExp,
        edges: None,
    });
    let mut cfg = SimulationConfig {
        duration: 20_000.0,
        ..Default::default()
    };
    cfg.recording.probes = (0..8).collect();
    let r = simulate(&spec, &cfg).unwrap();
    let skip = 1000;
    let samples: Vec<f64> = r.traces.iter().flat_map(|t| t.v[skip..].iter().copied()).collect();
    let mean_v = samples.iter().sum::<f64>() / samples.len() as f64;
    let var_v = samples.iter().map(|v| (v - mean_v).powi(2)).sum::<f64>() / samples.len() as f64;

    let shifted = replace_input_with_leak_shift(&spec).unwrap().spec;
    assert!(shifted.stimuli.iter().all(|s| !matches!(s.kind, StimulusKind::PoissonPerNeuron { .. })));
    let dv = shifted.populations[0].params.v_rest - p.v_rest;
    let measured = mean_v - p.v_rest;
    assert!((dv / measured - 1.0).abs() < 0.05, "{dv} vs {measured}");

    // Deterministic drive: the membrane settles and stops fluctuating.
    let r2 = simulate(&shifted, &cfg).unwrap();
    let tail = &r2.traces[0].v[skip..];
    let var2 = tail.iter().map(|v| (v - tail[0]).powi(2)).sum::<f64>() / tail.len() as f64;
    assert!(var2 < var_v * 1e-6, "{var2} vs {var_v}");
}

#[test]
fn scaled_brunel_fits_the_wafer() {
    let built = build_brunel(&BrunelParams::default(), 0).unwrap();
    let (spec, report) = adapt_pipeline(&built, &AdaptationConfig::brunel_hardware(0)).unwrap();
    assert_eq!(spec.total_neurons(), 2083);
    assert_eq!(spec.stimulus_edges(), 2083 * 200);
    let max = in_degree_stats(&spec).unwrap().iter().map(|s| s.max).max().unwrap();
    assert!(max + 200 <= 14_000, "{max}");
    // Reference order of magnitude: 690,157 internal synapses.
    let s = spec.total_synapses() as f64;
    assert!((s / 690_157.0 - 1.0).abs() < 0.05, "{s}");
    assert!(report.counts_chain());
}

#[test]
fn downscaled_in_degree_follows_binomial_oracle() {
    let mut spec = NetworkSpec::new(2);
    spec.populations.push(Population::new("E", 1000, Sign::Excitatory, common::neuron()));
    spec.projections.push(Projection {
        id: "EE".into(),
        source: "E".into(),
        target: "E".into(),
        connector: Connector::FixedProbability { p: 0.1 },
        weight: Value::constant(0.1),
        delay: Value::constant(1.0),
        synapse: SynapseKind::CurrentExp,
        edges: None,
    });
    let out = downscale(&spec, 0.5, 0.5, 2).unwrap().spec;
    // p' = 0.1 * 0.5 / 0.5 over 499 possible sources.
    let mean = in_degree_stats(&out).unwrap()[0].mean;
    let sd = (499.0 * 0.1 * 0.9f64).sqrt() / 500f64.sqrt();
    assert!((mean - 49.9).abs() < 3.0 * sd, "{mean}");
    let w = scale_weights_linear(&out, 0.25).unwrap().spec;
    assert!((w.projections[0].weight.mean() - 0.4).abs() < 1e-12);
}

/// At a low-rate operating point a quarter-size network with linearly
/// compensated weights fires like the full-size one.
#[test]
fn downscaled_brunel_rate_tracks_reference() {
    let params = BrunelParams {
        n_total: 2000,
        g: 5.0,
        eta: 2.0,
        ..Default::default()
    };
    let rate = |spec: &NetworkSpec| {
        let r = simulate(
            spec,
            &SimulationConfig {
                duration: 1500.0,
                seed: 3,
                initial_v: InitialV::ResetToThreshold,
                ..Default::default()
            },
        )
        .unwrap();
        r.spikes
            .iter()
            .map(|s| s.iter().filter(|&&t| t > 500.0).count())
            .sum::<usize>() as f64
            / r.neurons.len() as f64
    };
    let mut full = build_brunel(&params, 3).unwrap();
    full.sample().unwrap();
    let config = AdaptationConfig {
        neuron_scale: 0.25,
        indegree_scale: 0.25,
        ..AdaptationConfig::identity(3)
    };
    let (small, _) = adapt_pipeline(&build_brunel(&params, 3).unwrap(), &config).unwrap();
    let (a, b) = (rate(&full), rate(&small));
    assert!((b / a - 1.0).abs() < 0.2, "full {a} Hz, scaled {b} Hz");
}
