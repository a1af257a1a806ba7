//! Spike record files: CSV with a commented JSON header, and a binary
//! equivalent. Records are `(time ms, neuron)` pairs sorted by time, then
//! neuron.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PopulationRange, SpikeRecord, Trace};
use crate::{Error, Result};

const CSV_MAGIC: &str = "# wafersim-spikes/1";
const BIN_MAGIC: &[u8; 8] = b"WSPIKES1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config_hash: String,
    duration_ms: f64,
    dt_ms: f64,
    deliveries: u64,
    internal_deliveries: u64,
    external_deliveries: u64,
    wall_time_s: f64,
    populations: Vec<PopulationRange>,
    /// Recorded neurons as inclusive ranges.
    recorded: Vec<(u32, u32)>,
}

fn ranges(ids: &[u32]) -> Vec<(u32, u32)> {
    let mut out: Vec<(u32, u32)> = Vec::new();
    for &i in ids {
        match out.last_mut() {
            Some((_, b)) if *b + 1 == i => *b = i,
            _ => out.push((i, i)),
        }
    }
    out
}

fn header(r: &SpikeRecord) -> Header {
    Header {
        config_hash: r.config_hash.clone(),
        duration_ms: r.duration,
        dt_ms: r.dt,
        deliveries: r.deliveries,
        internal_deliveries: r.internal_deliveries,
        external_deliveries: r.external_deliveries,
        wall_time_s: r.wall_time,
        populations: r.populations.clone(),
        recorded: ranges(&r.neurons),
    }
}

fn sorted_events(r: &SpikeRecord) -> Vec<(f64, u32)> {
    let mut ev: Vec<(f64, u32)> = r
        .neurons
        .iter()
        .zip(&r.spikes)
        .flat_map(|(&n, s)| s.iter().map(move |&t| (t, n)))
        .collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ev
}

fn from_parts(h: Header, events: Vec<(f64, u32)>) -> Result<SpikeRecord> {
    let neurons: Vec<u32> = h.recorded.iter().flat_map(|&(a, b)| a..=b).collect();
    let mut spikes = vec![Vec::new(); neurons.len()];
    for (t, n) in events {
        let k = neurons
            .binary_search(&n)
            .map_err(|_| Error::Format(format!("spike of unrecorded neuron {n}")))?;
        spikes[k].push(t);
    }
    Ok(SpikeRecord {
        populations: h.populations,
        neurons,
        spikes,
        duration: h.duration_ms,
        dt: h.dt_ms,
        internal_deliveries: h.internal_deliveries,
        external_deliveries: h.external_deliveries,
        deliveries: h.deliveries,
        wall_time: h.wall_time_s,
        config_hash: h.config_hash,
        traces: Vec::new(),
    })
}

pub fn write_spikes_csv(path: &Path, record: &SpikeRecord) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{CSV_MAGIC}")?;
    writeln!(w, "# {}", serde_json::to_string(&header(record))?)?;
    writeln!(w, "time_ms,neuron")?;
    for (t, n) in sorted_events(record) {
        writeln!(w, "{t},{n}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_spikes_csv(path: &Path) -> Result<SpikeRecord> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Format("truncated spike file".into()))?
            .map_err(Error::from)
    };
    if next()? != CSV_MAGIC {
        return Err(Error::Format("not a spike CSV file".into()));
    }
    let h: Header = serde_json::from_str(
        next()?
            .strip_prefix("# ")
            .ok_or_else(|| Error::Format("missing header".into()))?,
    )?;
    next()?;
    let mut events = Vec::new();
    for line in lines {
        let line = line?;
        let (t, n) = line
            .split_once(',')
            .ok_or_else(|| Error::Format(format!("bad record `{line}`")))?;
        let t: f64 = t.parse().map_err(|_| Error::Format(format!("bad time `{t}`")))?;
        let n: u32 = n.parse().map_err(|_| Error::Format(format!("bad neuron `{n}`")))?;
        events.push((t, n));
    }
    from_parts(h, events)
}

/// Binary form: magic, header length (u32 LE), JSON header, record count
/// (u64 LE), then 12-byte records of time (f64 LE) and neuron (u32 LE).
pub fn write_spikes_binary(path: &Path, record: &SpikeRecord) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let h = serde_json::to_vec(&header(record))?;
    w.write_all(BIN_MAGIC)?;
    w.write_all(&(h.len() as u32).to_le_bytes())?;
    w.write_all(&h)?;
    let ev = sorted_events(record);
    w.write_all(&(ev.len() as u64).to_le_bytes())?;
    for (t, n) in ev {
        w.write_all(&t.to_le_bytes())?;
        w.write_all(&n.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_spikes_binary(path: &Path) -> Result<SpikeRecord> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BIN_MAGIC {
        return Err(Error::Format("not a binary spike file".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let mut h = vec![0u8; u32::from_le_bytes(b4) as usize];
    r.read_exact(&mut h)?;
    let h: Header = serde_json::from_slice(&h)?;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    let mut events = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut b8)?;
        r.read_exact(&mut b4)?;
        events.push((f64::from_le_bytes(b8), u32::from_le_bytes(b4)));
    }
    from_parts(h, events)
}

/// Membrane traces as CSV: `time_ms,v_<neuron>,...`.
pub fn write_traces_csv(path: &Path, traces: &[Trace], dt: f64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "time_ms")?;
    for t in traces {
        write!(w, ",v_{}", t.neuron)?;
    }
    writeln!(w)?;
    let len = traces.iter().map(|t| t.v.len()).max().unwrap_or(0);
    for k in 0..len {
        write!(w, "{}", (k + 1) as f64 * dt)?;
        for t in traces {
            write!(w, ",{}", t.v.get(k).copied().unwrap_or(f64::NAN))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
