use rand::seq::index;
use rand::Rng;

use super::{Connector, Edge, Projection, Stimulus, StimulusKind};
use crate::rng::StreamFamily;
use crate::{Error, Result};

/// Instantiates a probabilistic projection into an explicit edge list.
///
/// Each target neuron reads its own random stream keyed by `(seed,
/// projection id)`, so the result does not depend on the order in which
/// projections or targets are processed. Edges come out sorted by target,
/// then source.
pub fn sample_connectivity(
    proj: &Projection,
    source_size: usize,
    target_size: usize,
    seed: u64,
) -> Result<Vec<Edge>> {
    let family = StreamFamily::new(seed, &format!("connect/{}", proj.id));
    let recurrent = proj.is_recurrent();
    let candidates = if recurrent {
        source_size.saturating_sub(1)
    } else {
        source_size
    };
    // maps a candidate slot onto a source index, skipping the diagonal
    let source_of = |slot: usize, tgt: usize| -> u32 {
        if recurrent && slot >= tgt {
            (slot + 1) as u32
        } else {
            slot as u32
        }
    };

    let mut edges = Vec::new();
    match proj.connector {
        Connector::FixedProbability { p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "projection `{}`: probability {p} outside [0, 1]",
                    proj.id
                )));
            }
            if p == 0.0 {
                return Ok(edges);
            }
            edges.reserve((p * candidates as f64 * target_size as f64 * 1.01) as usize);
            let log_q = (1.0 - p).ln();
            for tgt in 0..target_size {
                let mut rng = family.stream(tgt as u64);
                // geometric gaps between successes of independent Bernoulli(p) trials
                let mut slot: usize = 0;
                loop {
                    if p < 1.0 {
                        let u: f64 = rng.random();
                        let gap = ((1.0 - u).ln() / log_q).floor();
                        if gap >= (candidates - slot) as f64 {
                            break;
                        }
                        slot += gap as usize;
                    }
                    if slot >= candidates {
                        break;
                    }
                    let weight = proj.weight.sample_weight(&mut rng);
                    let delay = proj.delay.sample_delay(&mut rng);
                    edges.push(Edge {
                        src: source_of(slot, tgt),
                        tgt: tgt as u32,
                        weight: weight as f32,
                        delay: delay as f32,
                    });
                    slot += 1;
                }
            }
        }
        Connector::FixedInDegree { k } => {
            if k > candidates {
                return Err(Error::InfeasibleInDegree {
                    projection: proj.id.clone(),
                    k,
                    available: candidates,
                });
            }
            edges.reserve(k * target_size);
            for tgt in 0..target_size {
                let mut rng = family.stream(tgt as u64);
                let mut slots = index::sample(&mut rng, candidates, k).into_vec();
                slots.sort_unstable();
                for slot in slots {
                    let weight = proj.weight.sample_weight(&mut rng);
                    let delay = proj.delay.sample_delay(&mut rng);
                    edges.push(Edge {
                        src: source_of(slot, tgt),
                        tgt: tgt as u32,
                        weight: weight as f32,
                        delay: delay as f32,
                    });
                }
            }
        }
        Connector::ExplicitList => {
            return proj
                .edges
                .clone()
                .ok_or_else(|| Error::NotSampled(proj.id.clone()))
        }
    }
    Ok(edges)
}

/// Draws `samples_per_target` distinct pool sources for every target neuron.
pub fn sample_pool_edges(stim: &Stimulus, target_size: usize, seed: u64) -> Result<Vec<Edge>> {
    let StimulusKind::PoissonPool {
        pool_size,
        samples_per_target,
        weight,
        delay,
        ..
    } = stim.kind
    else {
        return Ok(Vec::new());
    };
    if samples_per_target > pool_size {
        return Err(Error::PoolTooSmall {
            samples: samples_per_target,
            pool: pool_size,
        });
    }
    let family = StreamFamily::new(seed, &format!("pool/{}", stim.id));
    let mut edges = Vec::with_capacity(samples_per_target as usize * target_size);
    for tgt in 0..target_size {
        let mut rng = family.stream(tgt as u64);
        let mut picks =
            index::sample(&mut rng, pool_size as usize, samples_per_target as usize).into_vec();
        picks.sort_unstable();
        edges.extend(picks.into_iter().map(|src| Edge {
            src: src as u32,
            tgt: tgt as u32,
            weight: weight as f32,
            delay: delay as f32,
        }));
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{SynapseKind, Value};
    use proptest::prelude::*;

    fn proj(connector: Connector, recurrent: bool) -> Projection {
        Projection {
            id: "p".into(),
            source: "a".into(),
            target: if recurrent { "a" } else { "b" }.into(),
            connector,
            weight: Value::constant(0.1),
            delay: Value::constant(1.5),
            synapse: SynapseKind::CurrentExp,
            edges: None,
        }
    }

    #[test]
    fn zero_probability_gives_no_edges() {
        let e = sample_connectivity(&proj(Connector::FixedProbability { p: 0.0 }, false), 50, 50, 1)
            .unwrap();
        assert!(e.is_empty());
    }

    #[test]
    fn full_probability_is_complete_graph_without_diagonal() {
        let e = sample_connectivity(&proj(Connector::FixedProbability { p: 1.0 }, true), 10, 10, 1)
            .unwrap();
        assert_eq!(e.len(), 90);
        assert!(e.iter().all(|e| e.src != e.tgt));
        let e = sample_connectivity(&proj(Connector::FixedProbability { p: 1.0 }, false), 10, 10, 1)
            .unwrap();
        assert_eq!(e.len(), 100);
    }

    #[test]
    fn binomial_edge_count_over_seeds() {
        // oracle: the edge count of 999_000 ordered pairs, each present with
        // p = 0.1, is Binomial(999_000, 0.1) with mean 99_900
        let n = 1000usize;
        let p = 0.1;
        let pairs = (n * (n - 1)) as f64;
        let mean = pairs * p;
        let sigma = (pairs * p * (1.0 - p)).sqrt();
        let counts: Vec<f64> = (0..30)
            .map(|seed| {
                sample_connectivity(&proj(Connector::FixedProbability { p }, true), n, n, seed)
                    .unwrap()
                    .len() as f64
            })
            .collect();
        let avg = counts.iter().sum::<f64>() / counts.len() as f64;
        assert!((avg - mean).abs() < 3.0 * sigma / (30f64).sqrt(), "{avg} vs {mean}");
        for c in counts {
            assert!((c - mean).abs() < 5.0 * sigma);
        }
    }

    #[test]
    fn infeasible_in_degree() {
        let r = sample_connectivity(&proj(Connector::FixedInDegree { k: 10 }, true), 10, 10, 1);
        assert!(matches!(r, Err(Error::InfeasibleInDegree { available: 9, .. })));
        let r = sample_connectivity(&proj(Connector::FixedInDegree { k: 10 }, false), 10, 10, 1);
        assert!(r.is_ok());
    }

    #[test]
    fn pool_edges_distinct_sources() {
        let stim = Stimulus {
            id: "pool".into(),
            target: "a".into(),
            kind: StimulusKind::PoissonPool {
                pool: 0,
                pool_size: 50,
                samples_per_target: 20,
                rate: 5.0,
                weight: 0.1,
                delay: 1.0,
            },
            synapse: SynapseKind::CurrentExp,
            edges: None,
        };
        let edges = sample_pool_edges(&stim, 30, 4).unwrap();
        assert_eq!(edges.len(), 600);
        for t in 0..30u32 {
            let mut srcs: Vec<u32> = edges.iter().filter(|e| e.tgt == t).map(|e| e.src).collect();
            srcs.dedup();
            assert_eq!(srcs.len(), 20);
        }
        let mut bad = stim.clone();
        bad.kind = StimulusKind::PoissonPool {
            pool: 0,
            pool_size: 10,
            samples_per_target: 11,
            rate: 1.0,
            weight: 0.1,
            delay: 1.0,
        };
        assert!(matches!(
            sample_pool_edges(&bad, 3, 0),
            Err(Error::PoolTooSmall { .. })
        ));
    }

    proptest! {
        #[test]
        fn resampling_is_identical(seed in 0u64..1000, p in 0.0f64..1.0, n in 1usize..60) {
            let pr = proj(Connector::FixedProbability { p }, true);
            let a = sample_connectivity(&pr, n, n, seed).unwrap();
            let b = sample_connectivity(&pr, n, n, seed).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn fixed_in_degree_is_exact(seed in 0u64..1000, k in 0usize..20, extra in 1usize..30, recurrent: bool) {
            let n = k + extra;
            let pr = proj(Connector::FixedInDegree { k }, recurrent);
            let edges = sample_connectivity(&pr, n, n, seed).unwrap();
            let mut counts = vec![0usize; n];
            for e in &edges {
                counts[e.tgt as usize] += 1;
                prop_assert!(!recurrent || e.src != e.tgt);
            }
            prop_assert!(counts.iter().all(|&c| c == k));
        }
    }
}
