//! Placement of neurons onto ASICs and capacity-limited routing of the
//! inter-ASIC connections.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hardware::{circuit_demand, pack, CombinedNeuron, Packing, WaferTopology};
use crate::network::NetworkSpec;
use crate::rng::stream;
use crate::{Error, Result};

/// Neuron-to-circuit assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Indexed by global neuron id.
    pub neurons: Vec<CombinedNeuron>,
    /// Used circuits per grid slot.
    pub used: Vec<u32>,
    /// (population id, first neuron, end) in declaration order.
    pub populations: Vec<(String, usize, usize)>,
    pub seed: u64,
}

impl Placement {
    pub fn asics_used(&self) -> usize {
        self.used.iter().filter(|&&u| u > 0).count()
    }
}

/// Places neurons in population order, each on a single ASIC with enough
/// merged circuits for its fan-in.
pub fn place(spec: &NetworkSpec, topology: &WaferTopology, seed: u64) -> Result<Placement> {
    let demand = circuit_demand(spec, topology).map_err(|e| match e {
        Error::InfeasibleFanIn { .. } => Error::PlacementOverflow(e.to_string()),
        e => e,
    })?;
    let neurons = match pack(&demand, topology) {
        Packing::Placed(n) => n,
        Packing::Overflow { placed, .. } => {
            return Err(Error::PlacementOverflow(format!(
                "{} neurons need {} circuits; only {placed} fit on {} ASICs",
                demand.len(),
                demand.iter().map(|&c| c as u64).sum::<u64>(),
                topology.available_asics()
            )))
        }
    };
    let mut used = vec![0u32; topology.available.len()];
    for n in &neurons {
        used[n.asic as usize] += n.circuits;
    }
    let offsets = spec.offsets();
    let populations = spec
        .populations
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.clone(), offsets[i], offsets[i + 1]))
        .collect();
    Ok(Placement {
        neurons,
        used,
        populations,
        seed,
    })
}

/// Synapse accounting for one projection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionMapping {
    pub id: String,
    pub source: String,
    pub target: String,
    pub requested: usize,
    pub realized: usize,
    pub lost: usize,
}

impl ProjectionMapping {
    pub fn loss_fraction(&self) -> f64 {
        if self.requested == 0 {
            0.0
        } else {
            self.lost as f64 / self.requested as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingResult {
    pub placement: Placement,
    pub projections: Vec<ProjectionMapping>,
    /// Lanes in use per grid edge, indexed like [`WaferTopology::edge_index`].
    pub lane_usage: Vec<u32>,
    pub route_capacity: u32,
    /// Requested (source ASIC, target ASIC) routes.
    pub routes_requested: usize,
    /// Routes that could not be given lanes, sorted.
    pub lost_routes: Vec<(u32, u32)>,
    pub seed: u64,
    pub spec_hash: String,
    pub topology_hash: String,
}

impl MappingResult {
    pub fn requested(&self) -> usize {
        self.projections.iter().map(|p| p.requested).sum()
    }

    pub fn realized(&self) -> usize {
        self.projections.iter().map(|p| p.realized).sum()
    }

    pub fn lost(&self) -> usize {
        self.projections.iter().map(|p| p.lost).sum()
    }

    pub fn loss_fraction(&self) -> f64 {
        match self.requested() {
            0 => 0.0,
            r => self.lost() as f64 / r as f64,
        }
    }

    /// Checks that this result was computed for `spec` on `topology`.
    pub fn check(&self, spec: &NetworkSpec, topology: &WaferTopology) -> Result<()> {
        if self.spec_hash != spec.structure_hash() || self.topology_hash != topology.content_hash()
        {
            return Err(Error::MappingMismatch);
        }
        Ok(())
    }
}

/// Shortest paths from one source slot over available slots. Breadth-first
/// with horizontal neighbors explored first, which makes the chosen path
/// unique.
fn bfs_parents(topology: &WaferTopology, src: u32) -> Vec<u32> {
    let mut parent = vec![u32::MAX; topology.available.len()];
    parent[src as usize] = src;
    let mut queue = VecDeque::from([src]);
    while let Some(s) = queue.pop_front() {
        for n in topology.neighbors(s) {
            if parent[n as usize] == u32::MAX {
                parent[n as usize] = s;
                queue.push_back(n);
            }
        }
    }
    parent
}

fn path_edges(topology: &WaferTopology, parents: &[u32], tgt: u32) -> Option<Vec<usize>> {
    if parents[tgt as usize] == u32::MAX {
        return None;
    }
    let mut edges = Vec::new();
    let mut cur = tgt;
    while parents[cur as usize] != cur {
        let p = parents[cur as usize];
        edges.push(topology.edge_index(p, cur));
        cur = p;
    }
    Some(edges)
}

/// Routes every (source ASIC, target ASIC) pair that carries synapses.
///
/// Each pair uses the fixed shortest path from [`bfs_parents`] and needs one
/// lane on every edge of it. Pairs are considered in an order shuffled by
/// the placement seed. A pair is admitted when, on each of its edges, fewer
/// than `route_capacity` earlier pairs asked for that edge. Admission thus
/// only depends on the pair's rank, so raising the capacity can only admit
/// more pairs. Synapses of a pair that is not admitted are lost.
pub fn route(
    spec: &NetworkSpec,
    placement: &Placement,
    topology: &WaferTopology,
) -> Result<MappingResult> {
    if placement.neurons.len() != spec.total_neurons() {
        return Err(Error::MappingMismatch);
    }
    let offsets = spec.offsets();
    // per projection: (source ASIC, target ASIC) -> synapse count
    let counts: Vec<HashMap<(u32, u32), usize>> = spec
        .projections
        .par_iter()
        .map(|p| -> Result<_> {
            let edges = p.edges.as_ref().ok_or_else(|| Error::NotSampled(p.id.clone()))?;
            let so = offsets[spec.population_index(&p.source)?];
            let to = offsets[spec.population_index(&p.target)?];
            let mut m = HashMap::new();
            for e in edges {
                let s = placement.neurons[so + e.src as usize].asic;
                let t = placement.neurons[to + e.tgt as usize].asic;
                if s != t {
                    *m.entry((s, t)).or_insert(0) += 1;
                }
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;

    let mut pairs: Vec<(u32, u32)> = counts
        .iter()
        .flat_map(|m| m.keys().copied())
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    pairs.sort_unstable();
    let mut order = pairs.clone();
    order.shuffle(&mut stream(placement.seed, "route", 0));

    let mut parents: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut demand_rank = vec![0u32; topology.edge_count()];
    let mut lane_usage = vec![0u32; topology.edge_count()];
    let mut lost_routes = Vec::new();
    for &(s, t) in &order {
        let par = parents
            .entry(s)
            .or_insert_with(|| bfs_parents(topology, s));
        let Some(path) = path_edges(topology, par, t) else {
            lost_routes.push((s, t));
            continue;
        };
        let admitted = path
            .iter()
            .all(|&e| demand_rank[e] < topology.route_capacity);
        for &e in &path {
            demand_rank[e] += 1;
            if admitted {
                lane_usage[e] += 1;
            }
        }
        if !admitted {
            lost_routes.push((s, t));
        }
    }
    lost_routes.sort_unstable();
    let lost_set: HashSet<(u32, u32)> = lost_routes.iter().copied().collect();

    let projections = spec
        .projections
        .iter()
        .zip(&counts)
        .map(|(p, m)| {
            let requested = p.edge_count();
            let lost = m
                .iter()
                .filter(|(k, _)| lost_set.contains(k))
                .map(|(_, &c)| c)
                .sum();
            ProjectionMapping {
                id: p.id.clone(),
                source: p.source.clone(),
                target: p.target.clone(),
                requested,
                realized: requested - lost,
                lost,
            }
        })
        .collect();

    Ok(MappingResult {
        placement: placement.clone(),
        projections,
        lane_usage,
        route_capacity: topology.route_capacity,
        routes_requested: pairs.len(),
        lost_routes,
        seed: placement.seed,
        spec_hash: spec.structure_hash(),
        topology_hash: topology.content_hash(),
    })
}

/// Places and routes in one go.
pub fn map_network(spec: &NetworkSpec, topology: &WaferTopology, seed: u64) -> Result<MappingResult> {
    let placement = place(spec, topology, seed)?;
    route(spec, &placement, topology)
}

/// Removes the synapses of unrouted ASIC pairs from the explicit edge lists.
pub fn apply_loss(spec: &NetworkSpec, result: &MappingResult) -> Result<NetworkSpec> {
    if result.spec_hash != spec.structure_hash()
        || result.placement.neurons.len() != spec.total_neurons()
    {
        return Err(Error::MappingMismatch);
    }
    let mut out = spec.clone();
    if result.lost_routes.is_empty() {
        return Ok(out);
    }
    let lost: HashSet<(u32, u32)> = result.lost_routes.iter().copied().collect();
    let offsets = spec.offsets();
    let neurons = &result.placement.neurons;
    for p in &mut out.projections {
        let so = offsets[spec.population_index(&p.source)?];
        let to = offsets[spec.population_index(&p.target)?];
        if let Some(edges) = &mut p.edges {
            edges.retain(|e| {
                let s = neurons[so + e.src as usize].asic;
                let t = neurons[to + e.tgt as usize].asic;
                !lost.contains(&(s, t))
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsicUsage {
    pub slot: u32,
    pub row: u32,
    pub col: u32,
    pub neurons: usize,
    pub circuits: u32,
    /// Neurons per population on this ASIC.
    pub populations: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneUsage {
    pub from: u32,
    pub to: u32,
    pub used: u32,
    pub capacity: u32,
}

/// Bounding box of the ASICs hosting one population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub population: String,
    pub asics: Vec<u32>,
    pub row_min: u32,
    pub row_max: u32,
    pub col_min: u32,
    pub col_max: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfferentLoss {
    pub population: String,
    pub requested: usize,
    pub lost: usize,
    pub loss_fraction: f64,
}

/// Machine-readable summary of a mapping, including the data needed to
/// draw the wafer with its placement clusters and bus load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingReport {
    pub asics: Vec<AsicUsage>,
    pub lanes: Vec<LaneUsage>,
    pub projections: Vec<ProjectionMapping>,
    pub loss_fractions: BTreeMap<String, f64>,
    pub afferent_loss: Vec<AfferentLoss>,
    pub clusters: Vec<Cluster>,
    pub requested: usize,
    pub realized: usize,
    pub lost: usize,
    pub routes_requested: usize,
    pub routes_lost: usize,
}

pub fn mapping_report(result: &MappingResult, topology: &WaferTopology) -> MappingReport {
    let placement = &result.placement;
    let mut asics: BTreeMap<u32, AsicUsage> = BTreeMap::new();
    let mut clusters = Vec::new();
    for (pop, start, end) in &placement.populations {
        let mut slots = Vec::new();
        for n in &placement.neurons[*start..*end] {
            let (row, col) = topology.coords(n.asic);
            let a = asics.entry(n.asic).or_insert_with(|| AsicUsage {
                slot: n.asic,
                row,
                col,
                neurons: 0,
                circuits: 0,
                populations: BTreeMap::new(),
            });
            a.neurons += 1;
            a.circuits += n.circuits;
            *a.populations.entry(pop.clone()).or_default() += 1;
            if slots.last() != Some(&n.asic) {
                slots.push(n.asic);
            }
        }
        slots.sort_unstable();
        slots.dedup();
        if !slots.is_empty() {
            let coords: Vec<(u32, u32)> = slots.iter().map(|&s| topology.coords(s)).collect();
            clusters.push(Cluster {
                population: pop.clone(),
                row_min: coords.iter().map(|c| c.0).min().unwrap_or(0),
                row_max: coords.iter().map(|c| c.0).max().unwrap_or(0),
                col_min: coords.iter().map(|c| c.1).min().unwrap_or(0),
                col_max: coords.iter().map(|c| c.1).max().unwrap_or(0),
                asics: slots,
            });
        }
    }
    let lanes = result
        .lane_usage
        .iter()
        .enumerate()
        .filter(|(_, &u)| u > 0)
        .map(|(e, &used)| {
            let (from, to) = topology.edge_endpoints(e);
            LaneUsage {
                from,
                to,
                used,
                capacity: result.route_capacity,
            }
        })
        .collect();
    let mut afferent: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for p in &result.projections {
        let a = afferent.entry(&p.target).or_default();
        a.0 += p.requested;
        a.1 += p.lost;
    }
    let afferent_loss = placement
        .populations
        .iter()
        .filter_map(|(pop, _, _)| {
            afferent.get(pop.as_str()).map(|&(requested, lost)| AfferentLoss {
                population: pop.clone(),
                requested,
                lost,
                loss_fraction: if requested == 0 {
                    0.0
                } else {
                    lost as f64 / requested as f64
                },
            })
        })
        .collect();
    MappingReport {
        asics: asics.into_values().collect(),
        lanes,
        loss_fractions: result
            .projections
            .iter()
            .map(|p| (p.id.clone(), p.loss_fraction()))
            .collect(),
        projections: result.projections.clone(),
        afferent_loss,
        clusters,
        requested: result.requested(),
        realized: result.realized(),
        lost: result.lost(),
        routes_requested: result.routes_requested,
        routes_lost: result.lost_routes.len(),
    }
}
