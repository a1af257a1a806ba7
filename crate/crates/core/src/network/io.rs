//! Network files: a JSON document plus an optional binary edge sidecar.
//!
//! The sidecar holds little-endian records `(src u32, tgt u32, weight f32,
//! delay f32)`, projections first in declaration order, then stimuli. The
//! JSON document lists how many records belong to each entry (`null` for
//! unsampled entries).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Edge, NetworkSpec};
use crate::{Error, Result};

pub const EDGE_RECORD_BYTES: usize = 16;
const FORMAT: &str = "wafersim-network/1";

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    format: String,
    network: NetworkSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<EdgeIndex>,
}

#[derive(Serialize, Deserialize)]
struct EdgeIndex {
    sidecar: String,
    projections: Vec<Option<u64>>,
    stimuli: Vec<Option<u64>>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(".edges.bin");
    path.with_file_name(name)
}

pub fn write_edges<W: Write>(out: &mut W, edges: &[Edge]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(edges.len() * EDGE_RECORD_BYTES);
    for e in edges {
        buf.extend_from_slice(&e.src.to_le_bytes());
        buf.extend_from_slice(&e.tgt.to_le_bytes());
        buf.extend_from_slice(&e.weight.to_le_bytes());
        buf.extend_from_slice(&e.delay.to_le_bytes());
    }
    out.write_all(&buf)
}

pub fn read_edges<R: Read>(input: &mut R, count: usize) -> Result<Vec<Edge>> {
    let mut buf = vec![0u8; count * EDGE_RECORD_BYTES];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("edge sidecar truncated: {e}")))?;
    let word = |c: &[u8], i: usize| [c[i], c[i + 1], c[i + 2], c[i + 3]];
    Ok(buf
        .chunks_exact(EDGE_RECORD_BYTES)
        .map(|c| Edge {
            src: u32::from_le_bytes(word(c, 0)),
            tgt: u32::from_le_bytes(word(c, 4)),
            weight: f32::from_le_bytes(word(c, 8)),
            delay: f32::from_le_bytes(word(c, 12)),
        })
        .collect())
}

/// Writes `spec` to `path`; explicit edges go to `<stem>.edges.bin` next to it.
pub fn write_network(path: &Path, spec: &NetworkSpec) -> Result<()> {
    let any_edges = spec.projections.iter().any(|p| p.edges.is_some())
        || spec.stimuli.iter().any(|s| s.edges.is_some());
    let edges = if any_edges {
        let side = sidecar_path(path);
        let mut w = BufWriter::new(File::create(&side)?);
        for e in spec
            .projections
            .iter()
            .filter_map(|p| p.edges.as_ref())
            .chain(spec.stimuli.iter().filter_map(|s| s.edges.as_ref()))
        {
            write_edges(&mut w, e)?;
        }
        w.flush()?;
        Some(EdgeIndex {
            sidecar: side
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            projections: spec
                .projections
                .iter()
                .map(|p| p.edges.as_ref().map(|e| e.len() as u64))
                .collect(),
            stimuli: spec
                .stimuli
                .iter()
                .map(|s| s.edges.as_ref().map(|e| e.len() as u64))
                .collect(),
        })
    } else {
        None
    };
    let file = NetworkFile {
        format: FORMAT.to_string(),
        network: spec.clone(),
        edges,
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &file)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_network(path: &Path) -> Result<NetworkSpec> {
    let file: NetworkFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if file.format != FORMAT {
        return Err(Error::Format(format!("unknown network format `{}`", file.format)));
    }
    let mut spec = file.network;
    if let Some(index) = file.edges {
        if index.projections.len() != spec.projections.len()
            || index.stimuli.len() != spec.stimuli.len()
        {
            return Err(Error::Format("edge index does not match network".into()));
        }
        let side = path.with_file_name(&index.sidecar);
        let mut r = BufReader::new(File::open(&side)?);
        for (p, count) in spec.projections.iter_mut().zip(&index.projections) {
            if let Some(n) = count {
                p.edges = Some(read_edges(&mut r, *n as usize)?);
            }
        }
        for (s, count) in spec.stimuli.iter_mut().zip(&index.stimuli) {
            if let Some(n) = count {
                s.edges = Some(read_edges(&mut r, *n as usize)?);
            }
        }
    }
    Ok(spec)
}
