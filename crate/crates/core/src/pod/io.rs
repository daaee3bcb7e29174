//! `MSPOD1` binary files for basis and mode columns, plus a JSON sidecar.
//!
//! Layout (little endian): magic `MSPOD1`, `u32` version, `u64` dim,
//! `u64` N_h, `u64` N_H, `u64` count, then `count x N_h` `f64` column-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PodBasis;
use crate::error::{Error, Result};
use crate::local::Support;

pub const MAGIC: &[u8; 6] = b"MSPOD1";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub dim: u64,
    pub n_fine: u64,
    pub n_coarse: u64,
    pub count: u64,
}

pub fn write_columns(path: &Path, dim: usize, n_coarse: usize, columns: &[Vec<f64>]) -> Result<()> {
    let n_fine = columns.first().map_or(0, |c| c.len());
    if let Some(bad) = columns.iter().find(|c| c.len() != n_fine) {
        return Err(Error::DimensionMismatch {
            expected: n_fine,
            got: bad.len(),
        });
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [dim, n_fine, n_coarse, columns.len()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for c in columns {
        for x in c {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_columns(path: &Path) -> Result<(Header, Vec<Vec<f64>>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not an MSPOD1 file".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported MSPOD1 version {version}")));
    }
    let mut b8 = [0u8; 8];
    let mut next = || -> Result<u64> {
        r.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    let header = Header {
        dim: next()?,
        n_fine: next()?,
        n_coarse: next()?,
        count: next()?,
    };
    if header.dim != 1 && header.dim != 2 {
        return Err(Error::Format(format!("dimension {} in header", header.dim)));
    }
    let mut columns = Vec::with_capacity(header.count as usize);
    let mut buf = vec![0u8; 8 * header.n_fine as usize];
    for _ in 0..header.count {
        r.read_exact(&mut buf)?;
        columns.push(
            buf.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        );
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", rest.len())));
    }
    Ok((header, columns))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub dim: usize,
    pub n_fine: usize,
    pub n_coarse: usize,
    pub q: usize,
    pub rho: Option<f64>,
    pub alpha: Vec<f64>,
    /// `m_i + 1` columns per node (mean first).
    pub columns_per_node: Vec<usize>,
    pub sigma: Vec<Vec<f64>>,
    /// SHA-256 of the potential spec the snapshots were drawn from.
    pub potential_hash: String,
}

/// Writes `<stem>.mspod` and `<stem>.json`.
pub fn save_pod(
    stem: &Path,
    dim: usize,
    n_fine: usize,
    pods: &[PodBasis],
    alpha: &[f64],
    potential_hash: &str,
) -> Result<()> {
    let mut columns = Vec::new();
    for p in pods {
        for k in 0..=p.rank() {
            columns.push(p.vector(k).to_full(n_fine));
        }
    }
    write_columns(&stem.with_extension("mspod"), dim, pods.len(), &columns)?;
    let side = Sidecar {
        dim,
        n_fine,
        n_coarse: pods.len(),
        q: pods.first().map_or(0, |p| p.q),
        rho: pods.first().and_then(|p| p.rho),
        alpha: alpha.to_vec(),
        columns_per_node: pods.iter().map(|p| p.rank() + 1).collect(),
        sigma: pods.iter().map(|p| p.sigma.clone()).collect(),
        potential_hash: potential_hash.to_string(),
    };
    std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

/// Reads a basis written by [`save_pod`]; supports come back as full vectors.
pub fn load_pod(stem: &Path) -> Result<(Sidecar, Vec<PodBasis>)> {
    let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
    let (header, columns) = read_columns(&stem.with_extension("mspod"))?;
    let expected: usize = side.columns_per_node.iter().sum();
    if header.count as usize != expected || header.n_fine as usize != side.n_fine {
        return Err(Error::Format(format!(
            "sidecar describes {expected} columns of length {}, file has {} of length {}",
            side.n_fine, header.count, header.n_fine
        )));
    }
    let mut it = columns.into_iter();
    let mut pods = Vec::with_capacity(side.n_coarse);
    for (node, &cnt) in side.columns_per_node.iter().enumerate() {
        let zeta0 = it.next().ok_or_else(|| Error::Format("missing columns".into()))?;
        let modes: Vec<Vec<f64>> = it.by_ref().take(cnt - 1).collect();
        pods.push(PodBasis {
            node,
            support: Support::Full(side.n_fine),
            zeta0,
            modes,
            sigma: side.sigma.get(node).cloned().unwrap_or_default(),
            rho: side.rho,
            q: side.q,
        });
    }
    Ok((side, pods))
}
