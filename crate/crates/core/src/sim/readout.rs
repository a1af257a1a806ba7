use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::SpikeRecord;
use crate::mapper::Placement;
use crate::rng::stream;
use crate::{Error, Result};

/// Keeps the spikes of `n` recorded neurons, as when only a few neurons can
/// be read out at high rates.
///
/// Without a placement the neurons are drawn uniformly. With one, they are
/// spread over ASICs: every round visits the ASICs in a shuffled order and
/// takes one not yet chosen neuron from each, so no ASIC contributes twice
/// while another contributes nothing.
pub fn readout_subset(
    record: &SpikeRecord,
    n: usize,
    seed: u64,
    placement: Option<&Placement>,
) -> Result<SpikeRecord> {
    let total = record.neurons.len();
    if n > total {
        return Err(Error::InvalidParameter(format!(
            "readout of {n} neurons from a record of {total}"
        )));
    }
    if n == total {
        return Ok(record.clone());
    }
    if n == 0 && total > 0 {
        log::warn!("readout subset of zero neurons; the record will be empty");
    }
    let mut rng = stream(seed, "readout", 0);
    let mut chosen: Vec<usize> = match placement {
        None => index::sample(&mut rng, total, n).into_vec(),
        Some(pl) => {
            let mut by_asic: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
            for (k, &id) in record.neurons.iter().enumerate() {
                let asic = pl
                    .neurons
                    .get(id as usize)
                    .ok_or(Error::MappingMismatch)?
                    .asic;
                by_asic.entry(asic).or_default().push(k);
            }
            let mut groups: Vec<Vec<usize>> = by_asic.into_values().collect();
            groups.shuffle(&mut rng);
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                for g in groups.iter_mut().filter(|g| !g.is_empty()) {
                    if out.len() == n {
                        break;
                    }
                    let j = rng.random_range(0..g.len());
                    out.push(g.swap_remove(j));
                }
            }
            out
        }
    };
    chosen.sort_unstable();
    let mut sub = record.clone();
    sub.neurons = chosen.iter().map(|&k| record.neurons[k]).collect();
    sub.spikes = chosen.iter().map(|&k| record.spikes[k].clone()).collect();
    Ok(sub)
}
