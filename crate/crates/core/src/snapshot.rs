//! On-disk field snapshots: a JSON header next to a raw little-endian payload.
//!
//! `<stem>.json` holds the header, `<stem>.bin` holds the three components
//! back to back, each `n³` doubles in x-fastest order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, GridField};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub schema_version: u32,
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub components: usize,
    pub dtype: String,
    pub layout: String,
    /// Transform convention used by any spectral data derived from the payload.
    pub fft_normalization: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
}

impl SnapshotHeader {
    pub fn for_grid(grid: &Grid, time: Option<f64>) -> Self {
        SnapshotHeader {
            schema_version: SCHEMA_VERSION,
            n: grid.n(),
            length: grid.length(),
            components: 3,
            dtype: "f64-le".into(),
            layout: "x-fastest".into(),
            fft_normalization: "forward unnormalized, inverse scaled by 1/n^3".into(),
            time,
        }
    }
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_snapshot(stem: &Path, field: &GridField, time: Option<f64>) -> Result<()> {
    let (json, bin) = paths(stem);
    let header = SnapshotHeader::for_grid(field.grid(), time);
    let mut payload = Vec::with_capacity(3 * field.grid().cells() * 8);
    for c in field.components() {
        for v in c {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_atomic(&bin, &payload)?;
    write_atomic(&json, &serde_json::to_vec_pretty(&header)?)?;
    Ok(())
}

pub fn read_snapshot(stem: &Path) -> Result<(SnapshotHeader, GridField)> {
    let (json, bin) = paths(stem);
    let header: SnapshotHeader = serde_json::from_slice(&fs::read(json)?)?;
    if header.schema_version != SCHEMA_VERSION
        || header.dtype != "f64-le"
        || header.layout != "x-fastest"
        || header.components != 3
    {
        return Err(Error::Format(format!(
            "unsupported snapshot header {header:?}"
        )));
    }
    let grid = Grid::new(header.n, header.length)?;
    let bytes = fs::read(bin)?;
    let cells = grid.cells();
    if bytes.len() != 3 * cells * 8 {
        return Err(Error::Format(format!(
            "payload holds {} bytes, expected {}",
            bytes.len(),
            3 * cells * 8
        )));
    }
    let mut values = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")));
    let comps = [0, 1, 2].map(|_| values.by_ref().take(cells).collect::<Vec<f64>>());
    Ok((header, GridField::new(grid, comps)?))
}
