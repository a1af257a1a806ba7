//! Network description shared by all pipeline stages.
//!
//! A [`NetworkSpec`] starts out probabilistic (connectors only) and becomes
//! explicit once [`NetworkSpec::sample`] has instantiated every projection
//! into an edge list. Later stages (adaptation, mapping loss) mutate the
//! explicit edges directly.

mod io;
mod sample;
mod validate;

pub use io::{read_edges, read_network, write_edges, write_network, EDGE_RECORD_BYTES};
pub use sample::{sample_connectivity, sample_pool_edges};
pub use validate::{validate_network, Finding, ValidationReport};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::hash::ContentHasher;
use crate::{Error, Result};

/// Smallest delay produced when sampling a delay distribution (ms).
pub const MIN_DELAY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParameters {
    /// Membrane time constant (ms).
    pub tau_m: f64,
    /// Refractory period (ms).
    pub tau_ref: f64,
    pub tau_syn_exc: f64,
    pub tau_syn_inh: f64,
    /// Leak (rest) potential (mV).
    pub v_rest: f64,
    pub v_reset: f64,
    pub v_thresh: f64,
    pub e_rev_exc: f64,
    pub e_rev_inh: f64,
    /// Membrane capacitance (nF).
    pub c_m: f64,
    /// Constant input current (nA).
    pub i_offset: f64,
}

/// Field names accepted by parameter-variation maps.
pub const PARAMETER_NAMES: [&str; 11] = [
    "tau_m",
    "tau_ref",
    "tau_syn_exc",
    "tau_syn_inh",
    "v_rest",
    "v_reset",
    "v_thresh",
    "e_rev_exc",
    "e_rev_inh",
    "c_m",
    "i_offset",
];

impl NeuronParameters {
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "tau_m" => self.tau_m,
            "tau_ref" => self.tau_ref,
            "tau_syn_exc" => self.tau_syn_exc,
            "tau_syn_inh" => self.tau_syn_inh,
            "v_rest" => self.v_rest,
            "v_reset" => self.v_reset,
            "v_thresh" => self.v_thresh,
            "e_rev_exc" => self.e_rev_exc,
            "e_rev_inh" => self.e_rev_inh,
            "c_m" => self.c_m,
            "i_offset" => self.i_offset,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> bool {
        let slot = match name {
            "tau_m" => &mut self.tau_m,
            "tau_ref" => &mut self.tau_ref,
            "tau_syn_exc" => &mut self.tau_syn_exc,
            "tau_syn_inh" => &mut self.tau_syn_inh,
            "v_rest" => &mut self.v_rest,
            "v_reset" => &mut self.v_reset,
            "v_thresh" => &mut self.v_thresh,
            "e_rev_exc" => &mut self.e_rev_exc,
            "e_rev_inh" => &mut self.e_rev_inh,
            "c_m" => &mut self.c_m,
            "i_offset" => &mut self.i_offset,
            _ => return false,
        };
        *slot = value;
        true
    }

    /// Leak conductance (µS).
    pub fn g_leak(&self) -> f64 {
        self.c_m / self.tau_m
    }

    /// Membrane resistance (MΩ).
    pub fn r_m(&self) -> f64 {
        self.tau_m / self.c_m
    }

    pub fn tau_syn(&self, sign: Sign) -> f64 {
        match sign {
            Sign::Excitatory => self.tau_syn_exc,
            Sign::Inhibitory => self.tau_syn_inh,
        }
    }

    pub fn e_rev(&self, sign: Sign) -> f64 {
        match sign {
            Sign::Excitatory => self.e_rev_exc,
            Sign::Inhibitory => self.e_rev_inh,
        }
    }

    /// Violated invariants, empty when the parameter set is physical.
    /// Reversal ordering is only checked when `conductance` is set.
    pub fn violations(&self, conductance: bool) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.tau_m > 0.0) {
            out.push(format!("tau_m = {} must be positive", self.tau_m));
        }
        if !(self.tau_ref >= 0.0) {
            out.push(format!("tau_ref = {} must be non-negative", self.tau_ref));
        }
        if !(self.tau_syn_exc > 0.0) || !(self.tau_syn_inh > 0.0) {
            out.push("synaptic time constants must be positive".to_string());
        }
        if !(self.c_m > 0.0) {
            out.push(format!("c_m = {} must be positive", self.c_m));
        }
        if !(self.v_reset < self.v_thresh) {
            out.push(format!(
                "v_reset = {} must be below v_thresh = {}",
                self.v_reset, self.v_thresh
            ));
        }
        if conductance && !(self.e_rev_inh < self.v_rest && self.v_rest < self.e_rev_exc) {
            out.push(format!(
                "reversal potentials must bracket v_rest ({} < {} < {})",
                self.e_rev_inh, self.v_rest, self.e_rev_exc
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynapseKind {
    /// Exponentially decaying current; weights in nA.
    CurrentExp,
    /// Exponentially decaying conductance; weights in µS.
    ConductanceExp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Excitatory,
    Inhibitory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub id: String,
    pub size: usize,
    pub sign: Sign,
    pub params: NeuronParameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params_per_neuron: Option<Vec<NeuronParameters>>,
}

impl Population {
    pub fn new(id: impl Into<String>, size: usize, sign: Sign, params: NeuronParameters) -> Self {
        Self {
            id: id.into(),
            size,
            sign,
            params,
            params_per_neuron: None,
        }
    }

    pub fn neuron_params(&self, index: usize) -> &NeuronParameters {
        match &self.params_per_neuron {
            Some(v) => &v[index],
            None => &self.params,
        }
    }

    /// Applies `f` to the nominal parameters and every per-neuron override.
    pub fn map_params(&mut self, mut f: impl FnMut(&mut NeuronParameters)) {
        f(&mut self.params);
        if let Some(v) = &mut self.params_per_neuron {
            v.iter_mut().for_each(f);
        }
    }
}

/// A scalar or a distribution that per-edge values are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Value {
    Constant { value: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Value {
    pub fn constant(value: f64) -> Self {
        Value::Constant { value }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Value::Constant { value } => value,
            Value::Normal { mean, .. } => mean,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Value::Constant { value } => Value::Constant {
                value: value * factor,
            },
            Value::Normal { mean, sd } => Value::Normal {
                mean: mean * factor,
                sd: sd * factor.abs(),
            },
        }
    }

    /// Draws a weight; normal draws whose sign differs from the mean are redrawn.
    pub fn sample_weight<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Value::Constant { value } => value,
            Value::Normal { mean, sd } => {
                let Ok(dist) = Normal::new(mean, sd) else {
                    return mean;
                };
                for _ in 0..100 {
                    let w = dist.sample(rng);
                    if w * mean >= 0.0 {
                        return w;
                    }
                }
                mean
            }
        }
    }

    /// Draws a delay, clipped below at [`MIN_DELAY`] for distributions.
    pub fn sample_delay<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Value::Constant { value } => value,
            Value::Normal { mean, sd } => match Normal::new(mean, sd) {
                Ok(dist) => dist.sample(rng).max(MIN_DELAY),
                Err(_) => mean,
            },
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, Value::Normal { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Connector {
    FixedProbability { p: f64 },
    FixedInDegree { k: usize },
    ExplicitList,
}

/// One synapse. Indices are local to the source and target populations.
#[derive(Debug, Clone, Copy, PartialEq)]
#[repr(C)]
pub struct Edge {
    pub src: u32,
    pub tgt: u32,
    pub weight: f32,
    pub delay: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub id: String,
    pub source: String,
    pub target: String,
    pub connector: Connector,
    pub weight: Value,
    pub delay: Value,
    pub synapse: SynapseKind,
    #[serde(skip)]
    pub edges: Option<Vec<Edge>>,
}

impl Projection {
    pub fn is_recurrent(&self) -> bool {
        self.source == self.target
    }

    pub fn is_probabilistic(&self) -> bool {
        !matches!(self.connector, Connector::ExplicitList)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.as_ref().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StimulusKind {
    /// Independent Poisson inputs per neuron: `in_degree` sources firing at `rate` Hz.
    PoissonPerNeuron {
        rate: f64,
        in_degree: u32,
        weight: f64,
    },
    /// A pool of Poisson sources; each target samples distinct sources.
    /// Stimuli naming the same `pool` share its sources.
    PoissonPool {
        pool: u32,
        pool_size: u32,
        samples_per_target: u32,
        rate: f64,
        weight: f64,
        delay: f64,
    },
    /// Deterministic drive through an elevated leak potential and/or offset current.
    LeakShift { delta_v: f64, delta_i: f64 },
}

/// External drive. Stimuli are always excitatory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub id: String,
    pub target: String,
    pub kind: StimulusKind,
    pub synapse: SynapseKind,
    /// Pool edges (`src` indexes the pool) once sampled.
    #[serde(skip)]
    pub edges: Option<Vec<Edge>>,
}

impl Stimulus {
    pub fn needs_edges(&self) -> bool {
        matches!(self.kind, StimulusKind::PoissonPool { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub populations: Vec<Population>,
    pub projections: Vec<Projection>,
    pub stimuli: Vec<Stimulus>,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            populations: Vec::new(),
            projections: Vec::new(),
            stimuli: Vec::new(),
            seed,
        }
    }

    pub fn population_index(&self, id: &str) -> Result<usize> {
        self.populations
            .iter()
            .position(|p| p.id == id)
            .ok_or_else(|| Error::UnknownPopulation(id.to_string()))
    }

    pub fn population(&self, id: &str) -> Result<&Population> {
        Ok(&self.populations[self.population_index(id)?])
    }

    /// First global neuron id of every population, plus the total at the end.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.populations.len() + 1);
        let mut acc = 0;
        for p in &self.populations {
            out.push(acc);
            acc += p.size;
        }
        out.push(acc);
        out
    }

    pub fn total_neurons(&self) -> usize {
        self.populations.iter().map(|p| p.size).sum()
    }

    /// Number of explicit internal synapses.
    pub fn total_synapses(&self) -> usize {
        self.projections.iter().map(Projection::edge_count).sum()
    }

    /// Number of explicit stimulus (pool) edges.
    pub fn stimulus_edges(&self) -> usize {
        self.stimuli
            .iter()
            .map(|s| s.edges.as_ref().map_or(0, Vec::len))
            .sum()
    }

    pub fn is_sampled(&self) -> bool {
        self.projections.iter().all(|p| p.edges.is_some())
            && self
                .stimuli
                .iter()
                .all(|s| !s.needs_edges() || s.edges.is_some())
    }

    /// True when every synapse, internal and external, is conductance based.
    pub fn is_hardware_ready(&self) -> bool {
        self.projections
            .iter()
            .all(|p| p.synapse == SynapseKind::ConductanceExp)
            && self.stimuli.iter().all(|s| {
                s.synapse == SynapseKind::ConductanceExp
                    || matches!(s.kind, StimulusKind::LeakShift { .. })
            })
    }

    /// Instantiates every probabilistic projection and pool stimulus that has
    /// no explicit edges yet. Already sampled entries are left untouched.
    pub fn sample(&mut self) -> Result<()> {
        use rayon::prelude::*;
        let sizes: Vec<(String, usize)> = self
            .populations
            .iter()
            .map(|p| (p.id.clone(), p.size))
            .collect();
        let size_of = |id: &str| -> Result<usize> {
            sizes
                .iter()
                .find(|(name, _)| name == id)
                .map(|(_, s)| *s)
                .ok_or_else(|| Error::UnknownPopulation(id.to_string()))
        };
        let seed = self.seed;
        let pending: Vec<(usize, usize, usize)> = self
            .projections
            .iter()
            .enumerate()
            .filter(|(_, p)| p.edges.is_none())
            .map(|(i, p)| Ok((i, size_of(&p.source)?, size_of(&p.target)?)))
            .collect::<Result<_>>()?;
        let sampled: Vec<(usize, Vec<Edge>)> = pending
            .par_iter()
            .map(|&(i, ns, nt)| {
                let proj = &self.projections[i];
                sample_connectivity(proj, ns, nt, seed).map(|e| (i, e))
            })
            .collect::<Result<_>>()?;
        for (i, edges) in sampled {
            self.projections[i].edges = Some(edges);
        }
        for k in 0..self.stimuli.len() {
            if self.stimuli[k].needs_edges() && self.stimuli[k].edges.is_none() {
                let nt = size_of(&self.stimuli[k].target)?;
                let edges = sample_pool_edges(&self.stimuli[k], nt, seed)?;
                self.stimuli[k].edges = Some(edges);
            }
        }
        Ok(())
    }

    /// Drops all explicit edges of probabilistic entries so they can be resampled.
    pub fn clear_sampled(&mut self) {
        for p in &mut self.projections {
            if p.is_probabilistic() {
                p.edges = None;
            }
        }
        for s in &mut self.stimuli {
            s.edges = None;
        }
    }

    /// Hash over everything: parameters, weights, delays and edges.
    pub fn content_hash(&self) -> String {
        let mut h = ContentHasher::new();
        h.bytes(&serde_json::to_vec(self).expect("network serializes"));
        for p in &self.projections {
            hash_edges(&mut h, p.edges.as_deref(), true);
        }
        for s in &self.stimuli {
            hash_edges(&mut h, s.edges.as_deref(), true);
        }
        h.finish()
    }

    /// Hash over what determines placement and routing: population sizes,
    /// projection endpoints and edge topology, stimulus fan-in. Weights,
    /// delays, rates and neuron parameters are excluded, so reprogramming
    /// them keeps a mapping valid.
    pub fn structure_hash(&self) -> String {
        let mut h = ContentHasher::new();
        for p in &self.populations {
            h.str(&p.id).u64(p.size as u64);
        }
        for p in &self.projections {
            h.str(&p.id).str(&p.source).str(&p.target);
            hash_edges(&mut h, p.edges.as_deref(), false);
        }
        for s in &self.stimuli {
            h.str(&s.id).str(&s.target);
            match s.kind {
                StimulusKind::PoissonPerNeuron { in_degree, .. } => {
                    h.u64(in_degree as u64);
                }
                StimulusKind::PoissonPool {
                    pool_size,
                    samples_per_target,
                    ..
                } => {
                    h.u64(pool_size as u64).u64(samples_per_target as u64);
                }
                StimulusKind::LeakShift { .. } => {
                    h.u64(0);
                }
            }
            hash_edges(&mut h, s.edges.as_deref(), false);
        }
        h.finish()
    }
}

fn hash_edges(h: &mut ContentHasher, edges: Option<&[Edge]>, with_values: bool) {
    match edges {
        None => {
            h.u64(u64::MAX);
        }
        Some(edges) => {
            h.u64(edges.len() as u64);
            let mut buf = Vec::with_capacity(edges.len() * 16);
            for e in edges {
                buf.extend_from_slice(&e.src.to_le_bytes());
                buf.extend_from_slice(&e.tgt.to_le_bytes());
                if with_values {
                    buf.extend_from_slice(&e.weight.to_le_bytes());
                    buf.extend_from_slice(&e.delay.to_le_bytes());
                }
            }
            h.raw(&buf);
        }
    }
}

/// Incoming internal synapse statistics of one population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InDegreeStats {
    pub population: String,
    pub mean: f64,
    pub max: usize,
    pub total_synapses: usize,
}

/// Per-neuron internal in-degree, indexed by global neuron id.
pub fn in_degrees(spec: &NetworkSpec) -> Result<Vec<usize>> {
    let offsets = spec.offsets();
    let mut deg = vec![0usize; spec.total_neurons()];
    for p in &spec.projections {
        let edges = p.edges.as_ref().ok_or_else(|| Error::NotSampled(p.id.clone()))?;
        let base = offsets[spec.population_index(&p.target)?];
        for e in edges {
            deg[base + e.tgt as usize] += 1;
        }
    }
    Ok(deg)
}

pub fn in_degree_stats(spec: &NetworkSpec) -> Result<Vec<InDegreeStats>> {
    let deg = in_degrees(spec)?;
    let offsets = spec.offsets();
    Ok(spec
        .populations
        .iter()
        .enumerate()
        .map(|(i, pop)| {
            let slice = &deg[offsets[i]..offsets[i + 1]];
            let total: usize = slice.iter().sum();
            InDegreeStats {
                population: pop.id.clone(),
                mean: if slice.is_empty() {
                    0.0
                } else {
                    total as f64 / slice.len() as f64
                },
                max: slice.iter().copied().max().unwrap_or(0),
                total_synapses: total,
            }
        })
        .collect())
}

/// Hardware fan-in per neuron: internal in-degree plus external synapses
/// (pool edges and per-neuron Poisson inputs). Leak shifts need no synapses.
pub fn fan_in(spec: &NetworkSpec) -> Result<Vec<usize>> {
    let mut deg = in_degrees(spec)?;
    let offsets = spec.offsets();
    for s in &spec.stimuli {
        let pi = spec.population_index(&s.target)?;
        let base = offsets[pi];
        match s.kind {
            StimulusKind::PoissonPerNeuron { in_degree, .. } => {
                for d in &mut deg[base..offsets[pi + 1]] {
                    *d += in_degree as usize;
                }
            }
            StimulusKind::PoissonPool { .. } => {
                let edges = s.edges.as_ref().ok_or_else(|| Error::NotSampled(s.id.clone()))?;
                for e in edges {
                    deg[base + e.tgt as usize] += 1;
                }
            }
            StimulusKind::LeakShift { .. } => {}
        }
    }
    Ok(deg)
}

/// Expected fan-in per population (internal plus external), usable before
/// sampling.
pub fn expected_fan_in(spec: &NetworkSpec) -> Result<Vec<f64>> {
    let mut out = vec![0.0; spec.populations.len()];
    for p in &spec.projections {
        let ti = spec.population_index(&p.target)?;
        let src = spec.population(&p.source)?;
        let tgt = &spec.populations[ti];
        let expected = match (&p.edges, p.connector) {
            (Some(e), _) => e.len() as f64 / tgt.size.max(1) as f64,
            (None, Connector::FixedProbability { p: prob }) => {
                let cand = if p.is_recurrent() {
                    src.size.saturating_sub(1)
                } else {
                    src.size
                };
                prob * cand as f64
            }
            (None, Connector::FixedInDegree { k }) => k as f64,
            (None, Connector::ExplicitList) => return Err(Error::NotSampled(p.id.clone())),
        };
        out[ti] += expected;
    }
    for s in &spec.stimuli {
        let ti = spec.population_index(&s.target)?;
        match s.kind {
            StimulusKind::PoissonPerNeuron { in_degree, .. } => out[ti] += in_degree as f64,
            StimulusKind::PoissonPool {
                samples_per_target, ..
            } => out[ti] += samples_per_target as f64,
            StimulusKind::LeakShift { .. } => {}
        }
    }
    Ok(out)
}

/// Expected number of internal synapses from the connectors alone.
pub fn expected_synapses(spec: &NetworkSpec) -> Result<f64> {
    let mut total = 0.0;
    for p in &spec.projections {
        let ns = spec.population(&p.source)?.size;
        let nt = spec.population(&p.target)?.size;
        total += match p.connector {
            Connector::FixedProbability { p: prob } => {
                let pairs = if p.is_recurrent() { ns * (ns - 1) } else { ns * nt };
                prob * pairs as f64
            }
            Connector::FixedInDegree { k } => (k * nt) as f64,
            Connector::ExplicitList => p.edge_count() as f64,
        };
    }
    Ok(total)
}
