//! Throughput figures of a simulation run and published reference numbers
//! for comparison.

use serde::{Deserialize, Serialize};

use crate::sim::{biological_speedup, SpikeRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub system: String,
    /// Synaptic events per second, in units of 10⁹.
    pub performance: f64,
    /// Energy per synaptic event (µJ).
    pub energy: f64,
    /// `energy` is an upper bound.
    pub energy_upper_bound: bool,
    /// Derived from a reported speedup factor rather than measured.
    pub estimated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTable {
    pub rows: Vec<ReferenceRow>,
}

const REFERENCE_ROWS: [(&str, f64, f64, bool, bool); 5] = [
    ("BrainScaleS-1", 162.0, 0.012, true, false),
    ("NeuroAIx-Framework", 19.0, 0.048, false, true),
    ("CsNN", 3.8, 0.783, false, true),
    ("NEST", 1.8, 0.48, false, true),
    ("SpiNNaker", 0.9, 0.6, false, false),
];

/// Published cortical-microcircuit throughput and energy figures.
pub fn reference_table() -> ReferenceTable {
    ReferenceTable {
        rows: REFERENCE_ROWS
            .iter()
            .map(|&(system, performance, energy, bound, estimated)| ReferenceRow {
                system: system.to_string(),
                performance,
                energy,
                energy_upper_bound: bound,
                estimated,
            })
            .collect(),
    }
}

impl ReferenceTable {
    /// Fixed-width text rendering; estimated rows carry a `*`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<20} {:>22} {:>18}\n",
            "System", "Events/s [1e9]", "Energy [uJ/event]"
        );
        for r in &self.rows {
            let name = if r.estimated {
                format!("{}*", r.system)
            } else {
                r.system.clone()
            };
            let energy = if r.energy_upper_bound {
                format!("<{}", r.energy)
            } else {
                r.energy.to_string()
            };
            out.push_str(&format!("{name:<20} {:>22} {energy:>18}\n", r.performance));
        }
        out.push_str("* estimated from a reported speedup factor\n");
        out.push_str("Energy values are reference data only; the wafer figure assumes 2 kW worst-case system power.\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub deliveries: u64,
    /// Wall-clock time (s).
    pub wall_time: f64,
    pub events_per_second: f64,
    /// Simulated biological time (s).
    pub bio_duration: f64,
    pub speedup: f64,
    pub reference: ReferenceTable,
}

/// Synaptic events per second and speedup of a run.
pub fn throughput_metrics(record: &SpikeRecord) -> Result<ThroughputReport> {
    if !(record.wall_time > 0.0) {
        return Err(Error::ZeroWallTime);
    }
    let bio = record.duration / 1000.0;
    Ok(ThroughputReport {
        deliveries: record.deliveries,
        wall_time: record.wall_time,
        events_per_second: record.deliveries as f64 / record.wall_time,
        bio_duration: bio,
        speedup: biological_speedup(bio, record.wall_time)?,
        reference: reference_table(),
    })
}

impl ThroughputReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "deliveries        {}\nwall time         {:.3} s\nbiological time   {:.3} s\nsynaptic events/s {:.4e}\nspeedup           {:.4}\n\n",
            self.deliveries, self.wall_time, self.bio_duration, self.events_per_second, self.speedup
        );
        out.push_str(&self.reference.to_text());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SpikeRecord;

    fn record(deliveries: u64, wall: f64) -> SpikeRecord {
        SpikeRecord {
            populations: Vec::new(),
            neurons: Vec::new(),
            spikes: Vec::new(),
            duration: 1000.0,
            dt: 0.1,
            internal_deliveries: deliveries,
            external_deliveries: 0,
            deliveries,
            wall_time: wall,
            config_hash: String::new(),
            traces: Vec::new(),
        }
    }

    #[test]
    fn arithmetic() {
        let r = throughput_metrics(&record(1_000_000, 2.0)).unwrap();
        assert_eq!(r.events_per_second, 500_000.0);
        assert_eq!(r.speedup, 0.5);
        assert_eq!(throughput_metrics(&record(0, 1.0)).unwrap().events_per_second, 0.0);
        assert!(matches!(throughput_metrics(&record(5, 0.0)), Err(Error::ZeroWallTime)));
    }

    #[test]
    fn table_rows() {
        let t = reference_table();
        assert_eq!(t.rows.len(), 5);
        assert_eq!((t.rows[0].performance, t.rows[0].energy), (162.0, 0.012));
        assert!(t.rows[0].energy_upper_bound);
        assert_eq!((t.rows[4].performance, t.rows[4].energy), (0.9, 0.6));
    }
}
