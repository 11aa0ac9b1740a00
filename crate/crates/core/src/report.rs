//! Self-describing output files: every artifact carries the grid, the seed,
//! and a hash of the configuration that produced it.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};
use crate::measures::PathSample;
use crate::solver::Trajectory;
use crate::spectral::GridSpec;

pub const FORMAT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex hash of any serializable configuration (stable across runs: struct
/// fields serialize in declaration order).
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    let digest = Sha256::digest(&json);
    let mut out = String::with_capacity(16);
    for b in &digest[..8] {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileMeta {
    pub grid: Option<GridSpec>,
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

impl FileMeta {
    pub fn new(grid: Option<GridSpec>, seed: u64, config_hash: String) -> Self {
        Self {
            grid,
            seed,
            config_hash,
            version: FORMAT_VERSION.to_string(),
        }
    }

    fn comment_lines(&self) -> String {
        let mut s = String::new();
        if let Some(g) = &self.grid {
            s.push_str(&format!("# grid_points = {}\n", g.m_points()));
        }
        s.push_str(&format!("# seed = {}\n", self.seed));
        s.push_str(&format!("# config_hash = {}\n", self.config_hash));
        s.push_str(&format!("# version = {}\n", self.version));
        s
    }
}

/// One row per path, theta-grid columns.
pub fn write_paths_csv(path: &Path, samples: &[PathSample], meta: &FileMeta) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(meta.comment_lines().as_bytes())?;
    if let Some(first) = samples.first() {
        let header: Vec<String> = first
            .grid
            .points()
            .iter()
            .map(|t| format!("theta_{t:.6}"))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for s in samples {
            let row: Vec<String> = s.values.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}

/// Trajectory snapshots: `(time, a_0..a_N)` rows.
pub fn write_trajectory_csv(
    path: &Path,
    traj: &Trajectory,
    meta: &FileMeta,
    every: usize,
) -> Result<()> {
    if traj.states.is_empty() {
        return Err(CoreError::Invalid(
            "trajectory was run without state recording".into(),
        ));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(meta.comment_lines().as_bytes())?;
    let n = traj.states[0].n_modes();
    let header: Vec<String> = std::iter::once("time".to_string())
        .chain((0..=n).map(|k| format!("a{k}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, (t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
        if i % every.max(1) != 0 {
            continue;
        }
        let mut row = vec![format!("{t:.12e}")];
        row.extend(s.coeffs().iter().map(|v| format!("{v:.17e}")));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CoreError::Invalid(format!("json write: {e}")))?;
    w.write_all(b"\n")?;
    Ok(())
}

const COLUMN_MAGIC: &[u8; 8] = b"CHRCOL1\n";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ColumnHeader {
    pub meta: FileMeta,
    pub columns: Vec<String>,
    pub rows: u64,
}

/// Binary column format: magic, little-endian u64 header length, JSON
/// header, then column-major f64 little-endian data.
pub fn write_binary_columns(
    path: &Path,
    columns: &[(String, Vec<f64>)],
    meta: &FileMeta,
) -> Result<()> {
    let rows = columns.first().map(|c| c.1.len()).unwrap_or(0);
    if columns.iter().any(|c| c.1.len() != rows) {
        return Err(CoreError::Invalid("ragged columns".into()));
    }
    let header = ColumnHeader {
        meta: meta.clone(),
        columns: columns.iter().map(|c| c.0.clone()).collect(),
        rows: rows as u64,
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| CoreError::Invalid(format!("header: {e}")))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(COLUMN_MAGIC)?;
    w.write_all(&(header_json.len() as u64).to_le_bytes())?;
    w.write_all(&header_json)?;
    for (_, col) in columns {
        for v in col {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary_columns(path: &Path) -> Result<(ColumnHeader, Vec<Vec<f64>>)> {
    let mut f = File::open(path)?;
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != COLUMN_MAGIC {
        return Err(CoreError::Invalid("bad column-file magic".into()));
    }
    let mut len8 = [0u8; 8];
    f.read_exact(&mut len8)?;
    let hlen = u64::from_le_bytes(len8) as usize;
    let mut hbuf = vec![0u8; hlen];
    f.read_exact(&mut hbuf)?;
    let header: ColumnHeader = serde_json::from_slice(&hbuf)
        .map_err(|e| CoreError::Invalid(format!("column header: {e}")))?;
    let mut data = Vec::new();
    f.read_to_end(&mut data)?;
    let rows = header.rows as usize;
    let ncols = header.columns.len();
    if data.len() != rows * ncols * 8 {
        return Err(CoreError::Invalid(format!(
            "expected {} data bytes, found {}",
            rows * ncols * 8,
            data.len()
        )));
    }
    let mut cols = Vec::with_capacity(ncols);
    for c in 0..ncols {
        let mut col = Vec::with_capacity(rows);
        for r in 0..rows {
            let off = (c * rows + r) * 8;
            let mut b = [0u8; 8];
            b.copy_from_slice(&data[off..off + 8]);
            col.push(f64::from_le_bytes(b));
        }
        cols.push(col);
    }
    Ok((header, cols))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path)?;
    serde_json::from_reader(f).map_err(|e| CoreError::Invalid(format!("json read: {e}")))
}
