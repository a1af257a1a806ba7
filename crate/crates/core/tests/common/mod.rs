//! Independent oracles shared by the integration tests. Nothing here calls
//! into the engine's integration code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wafersim::network::{
    Connector, NetworkSpec, NeuronParameters, Population, Projection, Sign, SynapseKind, Value,
};

pub fn neuron() -> NeuronParameters {
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

/// Firing rate (Hz) of a LIF neuron under constant current `i` (nA).
pub fn lif_rate(p: &NeuronParameters, i: f64) -> f64 {
    let r = p.tau_m / p.c_m;
    let v_inf = p.v_rest + i * r;
    if v_inf <= p.v_thresh {
        return 0.0;
    }
    let t = p.tau_m * ((v_inf - p.v_reset) / (v_inf - p.v_thresh)).ln();
    1000.0 / (p.tau_ref + t)
}

fn rk4<const N: usize>(y: [f64; N], h: f64, f: impl Fn(&[f64; N]) -> [f64; N]) -> [f64; N] {
    let add = |a: &[f64; N], b: &[f64; N], s: f64| {
        let mut o = *a;
        for k in 0..N {
            o[k] += s * b[k];
        }
        o
    };
    let k1 = f(&y);
    let k2 = f(&add(&y, &k1, h / 2.0));
    let k3 = f(&add(&y, &k2, h / 2.0));
    let k4 = f(&add(&y, &k3, h));
    let mut o = y;
    for k in 0..N {
        o[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
    o
}

/// Signed peak PSP (mV) of a current synapse `w·exp(-t/τs)`, integrated
/// with RK4 at 1 µs.
pub fn rk4_current_psp(w: f64, tau_m: f64, tau_s: f64, c_m: f64) -> f64 {
    let h = 1e-3;
    let mut y = [0.0, w];
    let mut peak: f64 = 0.0;
    let t_end = 8.0 * tau_m.max(tau_s);
    let mut t = 0.0;
    while t < t_end {
        y = rk4(y, h, |y| [(-y[0] * c_m / tau_m + y[1]) / c_m, -y[1] / tau_s]);
        if y[0].abs() > peak.abs() {
            peak = y[0];
        }
        t += h;
    }
    peak
}

/// Signed peak PSP (mV) of a conductance synapse `g·exp(-t/τs)` on a
/// membrane resting at `v0`, integrated with RK4 at 1 µs.
pub fn rk4_conductance_psp(g: f64, tau_m: f64, tau_s: f64, c_m: f64, v0: f64, e_rev: f64) -> f64 {
    let h = 1e-3;
    let g_l = c_m / tau_m;
    let mut y = [v0, g];
    let mut peak: f64 = 0.0;
    let t_end = 8.0 * tau_m.max(tau_s);
    let mut t = 0.0;
    while t < t_end {
        y = rk4(y, h, |y| [(g_l * (v0 - y[0]) + y[1] * (e_rev - y[0])) / c_m, -y[1] / tau_s]);
        let d = y[0] - v0;
        if d.abs() > peak.abs() {
            peak = d;
        }
        t += h;
    }
    peak
}

/// Kolmogorov-Smirnov distance of `samples` from Exp(rate).
pub fn ks_exponential(samples: &mut [f64], rate: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-rate * x).exp();
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Random sampled network of 1 to 4 populations with up to ~3000 neurons.
pub fn random_network(seed: u64) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = NetworkSpec::new(seed);
    let n_pops = rng.random_range(1..=4);
    for i in 0..n_pops {
        let sign = if i % 2 == 0 { Sign::Excitatory } else { Sign::Inhibitory };
        spec.populations.push(Population::new(
            format!("P{i}"),
            rng.random_range(1..=800),
            sign,
            neuron(),
        ));
    }
    for s in 0..n_pops {
        for t in 0..n_pops {
            if rng.random_bool(0.3) {
                continue;
            }
            let w = if s % 2 == 0 { 0.1 } else { -0.4 };
            spec.projections.push(Projection {
                id: format!("P{s}->P{t}"),
                source: format!("P{s}"),
                target: format!("P{t}"),
                connector: Connector::FixedProbability {
                    p: rng.random_range(0.0..0.3),
                },
                weight: Value::constant(w),
                delay: Value::constant(1.5),
                synapse: SynapseKind::CurrentExp,
                edges: None,
            });
        }
    }
    spec.sample().expect("random network samples");
    spec
}

/// Original and adapted peak PSP (mV) of one randomized projection after
/// current-to-conductance conversion and time-constant clamping, both from
/// the RK4 oracle.
pub fn psp_case(seed: u64) -> (f64, f64) {
    use std::collections::BTreeMap;
    use wafersim::adapt::{clamp_time_constants, convert_current_to_conductance};
    use wafersim::psp::weight_for_psp;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sign = if rng.random_bool(0.5) { Sign::Excitatory } else { Sign::Inhibitory };
    let mut p = neuron();
    p.tau_m = rng.random_range(5.0..30.0);
    p.c_m = rng.random_range(0.1..1.0);
    let tau_s = rng.random_range(0.1..8.0);
    p.tau_syn_exc = tau_s;
    p.tau_syn_inh = tau_s;
    let min_tau = rng.random_range(0.5..2.0);
    let v_mean = rng.random_range(-65.0..-52.0);
    let psp = rng.random_range(0.05..0.5) * if sign == Sign::Excitatory { 1.0 } else { -1.0 };
    let w = weight_for_psp(psp, p.tau_m, tau_s, p.c_m);

    let mut spec = NetworkSpec::new(seed);
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

    let original = rk4_current_psp(w, p.tau_m, tau_s, p.c_m);
    let v_map = BTreeMap::from([("T".to_string(), v_mean)]);
    let conv = convert_current_to_conductance(&spec, &v_map).unwrap().spec;
    let clamped = clamp_time_constants(&conv, min_tau).unwrap().spec;
    let t = clamped.population("T").unwrap().params;
    let g = clamped.projections[0].edges.as_ref().unwrap()[0].weight as f64;
    let e_rev = t.e_rev(sign);
    let adapted = rk4_conductance_psp(g, t.tau_m, t.tau_syn(sign), t.c_m, v_mean, e_rev);
    (original, adapted)
}

#[derive(Debug)]
pub struct Flux {
    pub expected: f64,
    pub before: f64,
    pub se_before: f64,
    pub after: f64,
    pub se_after: f64,
}

/// External events per neuron per second with independent Poisson inputs
/// (1000 at 8 Hz) and after substituting a 400-source pool sampled 100
/// times, averaged over `seeds` runs. Standard errors come from the exact
/// count variance: Poisson before, sum of squared pool out-degrees after.
pub fn pool_flux(seeds: u64) -> Flux {
    use wafersim::adapt::substitute_poisson_pool;
    use wafersim::network::{Stimulus, StimulusKind};
    use wafersim::sim::{simulate, SimulationConfig};

    let (n, duration) = (200.0, 200.0);
    let secs = duration / 1000.0;
    let expected = 8.0 * 1000.0;
    let (mut before, mut after, mut var_after) = (0.0, 0.0, 0.0);
    for seed in 0..seeds {
        let mut spec = NetworkSpec::new(seed);
        let mut p = neuron();
        p.v_thresh = 1000.0;
        spec.populations.push(Population::new("N", n as usize, Sign::Excitatory, p));
        spec.stimuli.push(Stimulus {
            id: "ext".into(),
            target: "N".into(),
            kind: StimulusKind::PoissonPerNeuron {
                rate: 8.0,
                in_degree: 1000,
                weight: 0.01,
            },
            synapse: SynapseKind::CurrentExp,
            edges: None,
        });
        let cfg = SimulationConfig {
            duration,
            seed,
            ..Default::default()
        };
        before += simulate(&spec, &cfg).unwrap().external_deliveries as f64 / n / secs;

        let pooled = substitute_poisson_pool(&spec, 400, 100, seed).unwrap().spec;
        let StimulusKind::PoissonPool { rate, .. } = pooled.stimuli[0].kind else {
            panic!("no pool after substitution");
        };
        let mut deg = vec![0f64; 400];
        for e in pooled.stimuli[0].edges.as_ref().unwrap() {
            deg[e.src as usize] += 1.0;
        }
        var_after += deg.iter().map(|d| d * d * rate * secs).sum::<f64>() / (n * secs).powi(2);
        after += simulate(&pooled, &cfg).unwrap().external_deliveries as f64 / n / secs;
    }
    let k = seeds as f64;
    Flux {
        expected,
        before: before / k,
        se_before: (expected / (n * secs) / k).sqrt(),
        after: after / k,
        se_after: (var_after / k / k).sqrt(),
    }
}
