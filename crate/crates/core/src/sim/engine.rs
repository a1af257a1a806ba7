use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use super::poisson::{geometric_gap, step_probability};
use super::{InitialV, PopulationRange, SimulationConfig, SpikeRecord, Trace};
use crate::hash::ContentHasher;
use crate::network::{NetworkSpec, NeuronParameters, Sign, StimulusKind, SynapseKind};
use crate::rng::{stream, StreamFamily};
use crate::{Error, Result};

/// Neurons per parallel work unit. Fixed so results do not depend on the
/// number of threads.
const CHUNK: usize = 256;

/// Receptor channels of the input buffer.
const CHANNELS: usize = 4;
const CUR_EXC: u32 = 0;
const CUR_INH: u32 = 1;
const COND_EXC: u32 = 2;
const COND_INH: u32 = 3;

fn channel(kind: SynapseKind, sign: Sign) -> u32 {
    match (kind, sign) {
        (SynapseKind::CurrentExp, Sign::Excitatory) => CUR_EXC,
        (SynapseKind::CurrentExp, Sign::Inhibitory) => CUR_INH,
        (SynapseKind::ConductanceExp, Sign::Excitatory) => COND_EXC,
        (SynapseKind::ConductanceExp, Sign::Inhibitory) => COND_INH,
    }
}

#[derive(Debug, Clone, Copy)]
struct State {
    v: f64,
    /// Synaptic currents (nA) and conductances (µS).
    i_exc: f64,
    i_inh: f64,
    g_exc: f64,
    g_inh: f64,
    refractory: u32,
}

#[derive(Debug, Clone, Copy)]
struct Static {
    g_leak: f64,
    /// −dt/C, for the membrane decay under open conductances.
    neg_dt_over_c: f64,
    v_rest: f64,
    /// g_leak·v_rest plus all constant currents.
    drive: f64,
    v_reset: f64,
    v_thresh: f64,
    e_exc: f64,
    e_inh: f64,
    /// exp(−dt/τm), used when no conductance is open.
    decay_m: f64,
    decay_exc: f64,
    decay_inh: f64,
    /// Mean of a decaying synaptic trace over one step relative to its
    /// start value, so each input delivers its exact total charge.
    avg_exc: f64,
    avg_inh: f64,
    ref_steps: u32,
    population: u32,
}

impl Static {
    fn new(p: &NeuronParameters, extra_current: f64, dt: f64, population: u32) -> Self {
        let g_leak = p.g_leak();
        Self {
            g_leak,
            neg_dt_over_c: -dt / p.c_m,
            v_rest: p.v_rest,
            drive: g_leak * p.v_rest + p.i_offset + extra_current,
            v_reset: p.v_reset,
            v_thresh: p.v_thresh,
            e_exc: p.e_rev_exc,
            e_inh: p.e_rev_inh,
            decay_m: (-dt / p.tau_m).exp(),
            decay_exc: (-dt / p.tau_syn_exc).exp(),
            decay_inh: (-dt / p.tau_syn_inh).exp(),
            avg_exc: step_average(p.tau_syn_exc, dt),
            avg_inh: step_average(p.tau_syn_inh, dt),
            ref_steps: (p.tau_ref / dt).round() as u32,
            population,
        }
    }
}

fn step_average(tau: f64, dt: f64) -> f64 {
    tau / dt * -(-dt / tau).exp_m1()
}

/// One outgoing synapse. `slot` is the index into a ring-buffer row:
/// `target·CHANNELS + channel`.
#[derive(Debug, Clone, Copy)]
struct OutSynapse {
    slot: u32,
    weight: f32,
    delay: u32,
}

/// Outgoing synapses of a set of sources in compressed-row form.
struct Csr {
    offsets: Vec<usize>,
    synapses: Vec<OutSynapse>,
}

impl Csr {
    fn build(n_sources: usize, mut entries: Vec<(u32, OutSynapse)>) -> Self {
        entries.sort_by_key(|(s, o)| (*s, o.delay, o.slot));
        let mut offsets = vec![0usize; n_sources + 1];
        for (s, _) in &entries {
            offsets[*s as usize + 1] += 1;
        }
        for i in 0..n_sources {
            offsets[i + 1] += offsets[i];
        }
        Self {
            offsets,
            synapses: entries.into_iter().map(|(_, o)| o).collect(),
        }
    }

    fn row(&self, source: usize) -> &[OutSynapse] {
        &self.synapses[self.offsets[source]..self.offsets[source + 1]]
    }
}

/// Shared Poisson pool: sources spike independently at `prob` per step.
struct Pool {
    prob: f64,
    csr: Csr,
    next: Vec<u64>,
    rngs: Vec<ChaCha8Rng>,
}

/// Independent Poisson inputs of one population.
#[derive(Clone, Copy)]
struct ExternalInput {
    draws: Binomial,
    weight: f64,
    channel: u32,
}

fn delay_steps(delay: f64, dt: f64, origin: &str) -> Result<u32> {
    if delay < dt * (1.0 - 1e-6) {
        return Err(Error::DelayBelowStep {
            origin: origin.to_string(),
            delay,
            dt,
        });
    }
    Ok(((delay / dt).round() as u32).max(1))
}

fn config_hash(spec: &NetworkSpec, config: &SimulationConfig) -> String {
    let mut h = ContentHasher::new();
    h.str(&spec.content_hash())
        .bytes(&serde_json::to_vec(config).expect("config serializes"));
    h.finish()
}

/// Runs `spec` for `config.duration` ms.
///
/// Each step first applies the inputs due in that step (delayed spikes and
/// independent Poisson inputs), then integrates every neuron with an
/// exponential-Euler step at the step-averaged synaptic input, decays the synapses,
/// and detects threshold crossings. Spikes are stamped with the end time of
/// the step and delivered after the neuron update, in neuron order.
pub fn simulate(spec: &NetworkSpec, config: &SimulationConfig) -> Result<SpikeRecord> {
    config.check()?;
    let started = Instant::now();
    let dt = config.dt;
    let n = spec.total_neurons();
    let offsets = spec.offsets();

    // constant drive from leak-shift stimuli
    let mut extra_current = vec![0.0; spec.populations.len()];
    let mut externals: Vec<Vec<ExternalInput>> = vec![Vec::new(); spec.populations.len()];
    for s in &spec.stimuli {
        let pi = spec.population_index(&s.target)?;
        match s.kind {
            StimulusKind::LeakShift { delta_v, delta_i } => {
                extra_current[pi] += spec.populations[pi].params.g_leak() * delta_v + delta_i;
            }
            StimulusKind::PoissonPerNeuron {
                rate,
                in_degree,
                weight,
            } => {
                let p = step_probability(rate, dt)?;
                if in_degree > 0 && p > 0.0 {
                    externals[pi].push(ExternalInput {
                        draws: Binomial::new(in_degree as u64, p)
                            .map_err(|e| Error::InvalidParameter(e.to_string()))?,
                        weight,
                        channel: channel(s.synapse, Sign::Excitatory),
                    });
                }
            }
            StimulusKind::PoissonPool { .. } => {}
        }
    }

    let mut statics = Vec::with_capacity(n);
    for (pi, pop) in spec.populations.iter().enumerate() {
        for i in 0..pop.size {
            statics.push(Static::new(pop.neuron_params(i), extra_current[pi], dt, pi as u32));
        }
    }

    // internal synapses
    let mut entries = Vec::with_capacity(spec.total_synapses());
    let mut max_delay = 1u32;
    for proj in &spec.projections {
        let edges = proj
            .edges
            .as_ref()
            .ok_or_else(|| Error::NotSampled(proj.id.clone()))?;
        let si = spec.population_index(&proj.source)?;
        let ti = spec.population_index(&proj.target)?;
        let ch = channel(proj.synapse, spec.populations[si].sign);
        for e in edges {
            let d = delay_steps(e.delay as f64, dt, &proj.id)?;
            max_delay = max_delay.max(d);
            let tgt = (offsets[ti] + e.tgt as usize) as u32;
            entries.push((
                (offsets[si] + e.src as usize) as u32,
                OutSynapse {
                    slot: tgt * CHANNELS as u32 + ch,
                    weight: e.weight,
                    delay: d,
                },
            ));
        }
    }
    let internal = Csr::build(n, entries);

    // pools, keyed by pool id
    let mut pool_entries: std::collections::BTreeMap<u32, (u32, f64, Vec<(u32, OutSynapse)>)> =
        Default::default();
    for s in &spec.stimuli {
        let StimulusKind::PoissonPool {
            pool,
            pool_size,
            rate,
            delay,
            ..
        } = s.kind
        else {
            continue;
        };
        let edges = s.edges.as_ref().ok_or_else(|| Error::NotSampled(s.id.clone()))?;
        let ti = spec.population_index(&s.target)?;
        let entry = pool_entries
            .entry(pool)
            .or_insert_with(|| (pool_size, rate, Vec::new()));
        if entry.0 != pool_size || entry.1 != rate {
            return Err(Error::InvalidParameter(format!(
                "stimuli sharing pool {pool} disagree on size or rate"
            )));
        }
        let ch = channel(s.synapse, Sign::Excitatory);
        for e in edges {
            let d = delay_steps(if e.delay > 0.0 { e.delay as f64 } else { delay }, dt, &s.id)?;
            max_delay = max_delay.max(d);
            let tgt = (offsets[ti] + e.tgt as usize) as u32;
            entry.2.push((
                e.src,
                OutSynapse {
                    slot: tgt * CHANNELS as u32 + ch,
                    weight: e.weight,
                    delay: d,
                },
            ));
        }
    }
    let mut pools = Vec::new();
    for (id, (size, rate, entries)) in pool_entries {
        let prob = step_probability(rate, dt)?;
        let family = StreamFamily::new(config.seed, &format!("sim/pool/{id}"));
        let mut rngs: Vec<ChaCha8Rng> = (0..size as u64).map(|s| family.stream(s)).collect();
        let next = rngs
            .iter_mut()
            .map(|r| geometric_gap(prob, r) - 1)
            .collect();
        pools.push(Pool {
            prob,
            csr: Csr::build(size as usize, entries),
            next,
            rngs,
        });
    }

    // neuron state
    let mut states: Vec<State> = statics
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let v = match config.initial_v {
                InitialV::Rest => s.v_rest,
                InitialV::Uniform { low, high } => {
                    low + (high - low) * stream(config.seed, "sim/init", i as u64).random::<f64>()
                }
                InitialV::ResetToThreshold => {
                    let u: f64 = stream(config.seed, "sim/init", i as u64).random();
                    s.v_reset + (s.v_thresh - s.v_reset) * u
                }
            };
            State {
                v,
                i_exc: 0.0,
                i_inh: 0.0,
                g_exc: 0.0,
                g_inh: 0.0,
                refractory: 0,
            }
        })
        .collect();
    let mut ext_rngs: Vec<Option<ChaCha8Rng>> = statics
        .iter()
        .enumerate()
        .map(|(i, s)| {
            (!externals[s.population as usize].is_empty())
                .then(|| stream(config.seed, "sim/external", i as u64))
        })
        .collect();

    let ring_slots = max_delay as usize + 1;
    let row = n * CHANNELS;
    let mut ring = vec![0.0f64; ring_slots * row];

    // recording
    let recorded: Vec<u32> = match &config.recording.populations {
        None => (0..n as u32).collect(),
        Some(ids) => {
            let mut v = Vec::new();
            for id in ids {
                let pi = spec.population_index(id)?;
                v.extend(offsets[pi] as u32..offsets[pi + 1] as u32);
            }
            v.sort_unstable();
            v.dedup();
            v
        }
    };
    let mut record_index = vec![u32::MAX; n];
    for (k, &id) in recorded.iter().enumerate() {
        record_index[id as usize] = k as u32;
    }
    let mut spikes: Vec<Vec<f64>> = vec![Vec::new(); recorded.len()];
    for &p in &config.recording.probes {
        if p as usize >= n {
            return Err(Error::InvalidParameter(format!("probe neuron {p} out of range")));
        }
    }
    let steps = config.steps();
    let mut traces: Vec<Trace> = config
        .recording
        .probes
        .iter()
        .map(|&neuron| Trace {
            neuron,
            v: Vec::with_capacity(steps as usize),
        })
        .collect();

    let mut internal_deliveries = 0u64;
    let mut external_deliveries = 0u64;
    let mut fired: Vec<u32> = Vec::new();

    for step in 0..steps {
        let slot = (step % ring_slots as u64) as usize;
        let input = &mut ring[slot * row..(slot + 1) * row];
        let results: Vec<ChunkResult> = states
            .par_chunks_mut(CHUNK)
            .zip(input.par_chunks_mut(CHUNK * CHANNELS))
            .zip(ext_rngs.par_chunks_mut(CHUNK))
            .enumerate()
            .map(|(c, ((st, inp), rngs))| {
                let base = c * CHUNK;
                update_chunk(base, st, &statics[base..base + st.len()], inp, rngs, &externals)
            })
            .collect();

        fired.clear();
        for r in &results {
            if let Some(id) = r.non_finite {
                return Err(Error::NonFiniteState {
                    neuron: id,
                    time: (step + 1) as f64 * dt,
                });
            }
            fired.extend_from_slice(&r.fired);
            external_deliveries += r.external_events;
        }

        let t_spike = (step + 1) as f64 * dt;
        for &id in &fired {
            let k = record_index[id as usize];
            if k != u32::MAX {
                spikes[k as usize].push(t_spike);
            }
            let syn = internal.row(id as usize);
            internal_deliveries += syn.len() as u64;
            deliver(&mut ring, row, ring_slots, step, syn);
        }
        for pool in &mut pools {
            for s in 0..pool.next.len() {
                if pool.next[s] != step {
                    continue;
                }
                pool.next[s] = step.saturating_add(geometric_gap(pool.prob, &mut pool.rngs[s]));
                let syn = pool.csr.row(s);
                external_deliveries += syn.len() as u64;
                deliver(&mut ring, row, ring_slots, step, syn);
            }
        }
        for t in &mut traces {
            t.v.push(states[t.neuron as usize].v);
        }
    }

    let populations = spec
        .populations
        .iter()
        .enumerate()
        .map(|(i, p)| PopulationRange {
            id: p.id.clone(),
            start: offsets[i] as u32,
            end: offsets[i + 1] as u32,
        })
        .collect();
    let mut record = SpikeRecord {
        populations,
        neurons: recorded,
        spikes,
        duration: steps as f64 * dt,
        dt,
        internal_deliveries,
        external_deliveries,
        deliveries: internal_deliveries + external_deliveries,
        wall_time: 0.0,
        config_hash: config_hash(spec, config),
        traces,
    };
    if let Some(limit) = config.recording.readout_limit {
        record = super::readout_subset(&record, limit.min(record.neurons.len()), config.seed, None)?;
    }
    record.wall_time = started.elapsed().as_secs_f64();
    Ok(record)
}

#[inline]
fn deliver(ring: &mut [f64], row: usize, slots: usize, step: u64, syn: &[OutSynapse]) {
    for s in syn {
        let r = ((step + 1 + s.delay as u64) % slots as u64) as usize;
        ring[r * row + s.slot as usize] += s.weight as f64;
    }
}

struct ChunkResult {
    fired: Vec<u32>,
    external_events: u64,
    non_finite: Option<u32>,
}

fn update_chunk(
    base: usize,
    states: &mut [State],
    statics: &[Static],
    input: &mut [f64],
    rngs: &mut [Option<ChaCha8Rng>],
    externals: &[Vec<ExternalInput>],
) -> ChunkResult {
    let mut out = ChunkResult {
        fired: Vec::new(),
        external_events: 0,
        non_finite: None,
    };
    for (i, (st, p)) in states.iter_mut().zip(statics).enumerate() {
        let inp = &mut input[i * CHANNELS..(i + 1) * CHANNELS];
        st.i_exc += inp[CUR_EXC as usize];
        st.i_inh += inp[CUR_INH as usize];
        st.g_exc += inp[COND_EXC as usize];
        st.g_inh += inp[COND_INH as usize];
        inp.fill(0.0);
        if let Some(rng) = &mut rngs[i] {
            for ext in &externals[p.population as usize] {
                let k = ext.draws.sample(rng);
                if k > 0 {
                    out.external_events += k;
                    let w = ext.weight * k as f64;
                    match ext.channel {
                        CUR_EXC => st.i_exc += w,
                        CUR_INH => st.i_inh += w,
                        COND_EXC => st.g_exc += w,
                        _ => st.g_inh += w,
                    }
                }
            }
        }

        if st.refractory > 0 {
            st.refractory -= 1;
            st.v = p.v_reset;
        } else {
            let (g_exc, g_inh) = (st.g_exc * p.avg_exc, st.g_inh * p.avg_inh);
            let g = g_exc + g_inh;
            let current = p.drive
                + st.i_exc * p.avg_exc
                + st.i_inh * p.avg_inh
                + g_exc * p.e_exc
                + g_inh * p.e_inh;
            if g == 0.0 {
                let v_inf = current / p.g_leak;
                st.v = v_inf + (st.v - v_inf) * p.decay_m;
            } else {
                let g_tot = p.g_leak + g;
                let v_inf = current / g_tot;
                st.v = v_inf + (st.v - v_inf) * (p.neg_dt_over_c * g_tot).exp();
            }
        }
        st.i_exc *= p.decay_exc;
        st.i_inh *= p.decay_inh;
        st.g_exc *= p.decay_exc;
        st.g_inh *= p.decay_inh;

        if !st.v.is_finite() {
            out.non_finite.get_or_insert((base + i) as u32);
            continue;
        }
        if st.v >= p.v_thresh && st.refractory == 0 {
            out.fired.push((base + i) as u32);
            st.v = p.v_reset;
            st.refractory = p.ref_steps;
        }
    }
    out
}
