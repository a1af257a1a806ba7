//! Resource model of the wafer: a grid of ASICs, each with a fixed number
//! of neuron circuits, joined by bus lanes along the ASIC edges.

use serde::{Deserialize, Serialize};

use crate::hash::ContentHasher;
use crate::network::{expected_fan_in, fan_in, NetworkSpec};
use crate::{Error, Result};

/// Construction parameters of a [`WaferTopology`].
///
/// The per-ASIC numbers are not published figures; they are chosen so that
/// the wafer-wide totals come out at 196,608 neuron circuits and a
/// maximum fan-in of 14,336 synapses per combined neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaferConfig {
    pub rows: u32,
    pub cols: u32,
    /// Number of usable ASICs, taken as the slots nearest the grid center.
    /// `None` makes every slot available.
    pub available_asics: Option<u32>,
    pub circuits_per_asic: u32,
    pub fanin_per_circuit: u32,
    pub max_merge: u32,
    /// Bus lanes per ASIC edge. Zero is allowed and disables all
    /// inter-ASIC routes.
    pub route_capacity: u32,
    pub offchip_readout_limit: u32,
}

/// Lanes per grid edge in the default wafer.
pub const DEFAULT_ROUTE_CAPACITY: u32 = 74;

impl Default for WaferConfig {
    fn default() -> Self {
        Self {
            rows: 20,
            cols: 24,
            available_asics: Some(384),
            circuits_per_asic: 512,
            fanin_per_circuit: 224,
            max_merge: 64,
            route_capacity: DEFAULT_ROUTE_CAPACITY,
            offchip_readout_limit: 30,
        }
    }
}

/// Immutable description of the wafer resources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaferTopology {
    pub rows: u32,
    pub cols: u32,
    /// Availability per slot, row-major.
    pub available: Vec<bool>,
    pub circuits_per_asic: u32,
    pub fanin_per_circuit: u32,
    pub max_merge: u32,
    pub route_capacity: u32,
    pub offchip_readout_limit: u32,
    /// Available slots in fill order: outward from the center.
    pub fill_order: Vec<u32>,
}

/// A neuron built from one or more adjacent circuits of a single ASIC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinedNeuron {
    pub asic: u32,
    pub first_circuit: u32,
    pub circuits: u32,
}

impl CombinedNeuron {
    pub fn fan_in_capacity(&self, topology: &WaferTopology) -> usize {
        self.circuits as usize * topology.fanin_per_circuit as usize
    }
}

pub fn build_wafer(config: &WaferConfig) -> Result<WaferTopology> {
    let slots = config.rows as u64 * config.cols as u64;
    for (name, v) in [
        ("rows", config.rows),
        ("cols", config.cols),
        ("circuits_per_asic", config.circuits_per_asic),
        ("fanin_per_circuit", config.fanin_per_circuit),
        ("max_merge", config.max_merge),
    ] {
        if v == 0 {
            return Err(Error::ZeroCapacity(name.into()));
        }
    }
    let n_avail = config.available_asics.map_or(slots, u64::from);
    if n_avail == 0 {
        return Err(Error::ZeroCapacity("available_asics".into()));
    }
    if n_avail > slots {
        return Err(Error::InvalidParameter(format!(
            "{n_avail} available ASICs on a {}x{} grid",
            config.rows, config.cols
        )));
    }
    let (cr, cc) = (
        (config.rows as f64 - 1.0) / 2.0,
        (config.cols as f64 - 1.0) / 2.0,
    );
    let key = |i: u32| {
        let (r, c) = ((i / config.cols) as f64 - cr, (i % config.cols) as f64 - cc);
        (r * r + c * c, r.atan2(c))
    };
    let mut order: Vec<u32> = (0..slots as u32).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(a.cmp(&b))
    });
    order.truncate(n_avail as usize);
    let mut available = vec![false; slots as usize];
    for &i in &order {
        available[i as usize] = true;
    }
    Ok(WaferTopology {
        rows: config.rows,
        cols: config.cols,
        available,
        circuits_per_asic: config.circuits_per_asic,
        fanin_per_circuit: config.fanin_per_circuit,
        max_merge: config.max_merge,
        route_capacity: config.route_capacity,
        offchip_readout_limit: config.offchip_readout_limit,
        fill_order: order,
    })
}

impl WaferTopology {
    pub fn available_asics(&self) -> usize {
        self.fill_order.len()
    }

    pub fn total_circuits(&self) -> usize {
        self.available_asics() * self.circuits_per_asic as usize
    }

    pub fn max_fan_in(&self) -> usize {
        self.fanin_per_circuit as usize * self.max_merge as usize
    }

    /// (row, col) of a slot.
    pub fn coords(&self, slot: u32) -> (u32, u32) {
        (slot / self.cols, slot % self.cols)
    }

    /// Number of undirected edges between neighboring slots.
    pub fn edge_count(&self) -> usize {
        let (r, c) = (self.rows as usize, self.cols as usize);
        r * (c - 1) + (r - 1) * c
    }

    /// Index of the edge between two neighboring slots.
    pub fn edge_index(&self, a: u32, b: u32) -> usize {
        let (a, b) = (a.min(b), a.max(b));
        let (r, c) = self.coords(a);
        let cols = self.cols as usize;
        if b == a + 1 {
            r as usize * (cols - 1) + c as usize
        } else {
            debug_assert_eq!(b, a + self.cols);
            self.rows as usize * (cols - 1) + r as usize * cols + c as usize
        }
    }

    /// Endpoints of an edge index.
    pub fn edge_endpoints(&self, edge: usize) -> (u32, u32) {
        let cols = self.cols as usize;
        let horizontal = self.rows as usize * (cols - 1);
        if edge < horizontal {
            let (r, c) = (edge / (cols - 1), edge % (cols - 1));
            let a = (r * cols + c) as u32;
            (a, a + 1)
        } else {
            let a = (edge - horizontal) as u32;
            (a, a + self.cols)
        }
    }

    /// Available neighbors, horizontal ones first.
    pub fn neighbors(&self, slot: u32) -> impl Iterator<Item = u32> + '_ {
        let (r, c) = self.coords(slot);
        let cand = [
            (c + 1 < self.cols).then(|| slot + 1),
            (c > 0).then(|| slot - 1),
            (r + 1 < self.rows).then(|| slot + self.cols),
            (r > 0).then(|| slot - self.cols),
        ];
        cand.into_iter()
            .flatten()
            .filter(move |&s| self.available[s as usize])
    }

    pub fn content_hash(&self) -> String {
        let mut h = ContentHasher::new();
        h.bytes(&serde_json::to_vec(self).expect("topology serializes"));
        h.finish()
    }
}

/// Number of circuits one neuron with the given fan-in occupies.
pub fn circuits_needed(fan_in: usize, topology: &WaferTopology) -> Result<u32> {
    let per = topology.fanin_per_circuit as usize;
    let n = fan_in.div_ceil(per).max(1);
    if n > topology.max_merge as usize {
        return Err(Error::InfeasibleFanIn {
            fan_in,
            limit: topology.max_fan_in(),
        });
    }
    Ok(n as u32)
}

/// Outcome of packing neurons onto ASICs.
pub(crate) enum Packing {
    Placed(Vec<CombinedNeuron>),
    Overflow { placed: usize, asics_used: usize },
}

/// Greedy packing in neuron order: a neuron goes to the current ASIC if
/// its circuits still fit there, otherwise to the next ASIC in fill order.
pub(crate) fn pack(circuits: &[u32], topology: &WaferTopology) -> Packing {
    let mut out = Vec::with_capacity(circuits.len());
    let mut slot = 0usize;
    let mut used = 0u32;
    for &c in circuits {
        if used + c > topology.circuits_per_asic {
            slot += 1;
            used = 0;
        }
        if c > topology.circuits_per_asic || slot >= topology.fill_order.len() {
            return Packing::Overflow {
                placed: out.len(),
                asics_used: slot.min(topology.fill_order.len()),
            };
        }
        out.push(CombinedNeuron {
            asic: topology.fill_order[slot],
            first_circuit: used,
            circuits: c,
        });
        used += c;
    }
    Packing::Placed(out)
}

/// Circuit demand per neuron. Uses sampled fan-ins when available and the
/// expected per-population fan-in otherwise.
pub(crate) fn circuit_demand(spec: &NetworkSpec, topology: &WaferTopology) -> Result<Vec<u32>> {
    let fan_ins: Vec<usize> = if spec.is_sampled() {
        fan_in(spec)?
    } else {
        let per_pop = expected_fan_in(spec)?;
        spec.populations
            .iter()
            .zip(per_pop)
            .flat_map(|(p, f)| std::iter::repeat_n(f.ceil() as usize, p.size))
            .collect()
    };
    fan_ins
        .into_iter()
        .map(|f| circuits_needed(f, topology))
        .collect()
}

/// Resource summary of a network on a wafer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub neurons: usize,
    pub available_asics: usize,
    pub available_circuits: usize,
    /// Circuits needed with merging; `None` if some fan-in is infeasible.
    pub required_circuits: Option<usize>,
    pub max_fan_in: usize,
    pub fan_in_limit: usize,
    /// ASICs touched by the greedy packing.
    pub asics_used: usize,
    pub requested_synapses: f64,
    /// Upper bound on synapses any mapping can realize.
    pub max_synapses: usize,
    pub feasible: bool,
    pub reason: Option<String>,
}

pub fn capacity_report(topology: &WaferTopology, spec: &NetworkSpec) -> Result<CapacityReport> {
    let neurons = spec.total_neurons();
    let (max_fan_in, requested_synapses) = if spec.is_sampled() {
        let f = fan_in(spec)?;
        let ext: usize = f.iter().sum::<usize>() - spec.total_synapses();
        (f.into_iter().max().unwrap_or(0), (spec.total_synapses() + ext) as f64)
    } else {
        let per_pop = expected_fan_in(spec)?;
        let max = per_pop.iter().fold(0.0f64, |a, &b| a.max(b)).ceil() as usize;
        let total = spec
            .populations
            .iter()
            .zip(&per_pop)
            .map(|(p, f)| p.size as f64 * f)
            .sum();
        (max, total)
    };
    let mut report = CapacityReport {
        neurons,
        available_asics: topology.available_asics(),
        available_circuits: topology.total_circuits(),
        required_circuits: None,
        max_fan_in,
        fan_in_limit: topology.max_fan_in(),
        asics_used: 0,
        requested_synapses,
        max_synapses: topology.total_circuits() * topology.fanin_per_circuit as usize,
        feasible: false,
        reason: None,
    };
    let demand = match circuit_demand(spec, topology) {
        Ok(d) => d,
        Err(e @ Error::InfeasibleFanIn { .. }) => {
            report.reason = Some(e.to_string());
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    report.required_circuits = Some(demand.iter().map(|&c| c as usize).sum());
    match pack(&demand, topology) {
        Packing::Placed(p) => {
            let mut asics: Vec<u32> = p.iter().map(|n| n.asic).collect();
            asics.dedup();
            report.asics_used = asics.len();
            report.feasible = true;
        }
        Packing::Overflow { placed, asics_used } => {
            report.asics_used = asics_used;
            report.reason = Some(format!(
                "only {placed} of {neurons} neurons fit on {} ASICs",
                topology.available_asics()
            ));
        }
    }
    Ok(report)
}
