//! Binary tensor container.
//!
//! Layout: a 16-byte header followed by a little-endian `f64` payload.
//!
//! | bytes | field                                    |
//! |-------|------------------------------------------|
//! | 0..4  | magic `TPI3`                             |
//! | 4     | version (`1`)                            |
//! | 5     | kind: 0 dense, 1 factored, 2 matrix      |
//! | 6..8  | reserved (`0`)                           |
//! | 8..12 | `d` (u32 LE)                             |
//! | 12..16| `k` (u32 LE)                             |
//!
//! Payloads: dense stores `d³` entries in row-major `(i, j, l)` order with
//! `k = 0`; factored stores `k` weights then the `d × k` components column
//! by column; matrix stores a `d × k` matrix column by column. A JSON
//! sidecar at `<path>.json` records seed and provenance.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::dense::SYMMETRY_TOL;
use super::{DenseTensor3, FactoredTensor3, Tensor3, DENSE_DIM_LIMIT};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TPI3";
const VERSION: u8 = 1;
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TensorKind {
    Dense,
    Factored,
    Matrix,
}

impl TensorKind {
    fn code(self) -> u8 {
        match self {
            TensorKind::Dense => 0,
            TensorKind::Factored => 1,
            TensorKind::Matrix => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(TensorKind::Dense),
            1 => Ok(TensorKind::Factored),
            2 => Ok(TensorKind::Matrix),
            other => Err(Error::Format(format!("unknown kind byte {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorFile {
    Dense(DenseTensor3),
    Factored(FactoredTensor3),
    Matrix(Array2<f64>),
}

impl TensorFile {
    pub fn kind(&self) -> TensorKind {
        match self {
            TensorFile::Dense(_) => TensorKind::Dense,
            TensorFile::Factored(_) => TensorKind::Factored,
            TensorFile::Matrix(_) => TensorKind::Matrix,
        }
    }

    fn dims(&self) -> (usize, usize) {
        match self {
            TensorFile::Dense(t) => (t.dim(), 0),
            TensorFile::Factored(t) => (t.dim(), t.rank()),
            TensorFile::Matrix(m) => (m.nrows(), m.ncols()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub kind: TensorKind,
    pub dim: usize,
    pub rank: usize,
    pub seed: Option<u64>,
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn push_f64s<'a>(buf: &mut Vec<u8>, values: impl IntoIterator<Item = &'a f64>) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn column_major(m: &Array2<f64>) -> Vec<f64> {
    m.t().iter().copied().collect()
}

pub fn encode(file: &TensorFile) -> Result<Vec<u8>> {
    let (d, k) = file.dims();
    let to_u32 = |n: usize| u32::try_from(n).map_err(|_| Error::Resource(format!("dimension {n} exceeds u32")));
    let mut buf = Vec::with_capacity(HEADER_LEN);
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.push(file.kind().code());
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&to_u32(d)?.to_le_bytes());
    buf.extend_from_slice(&to_u32(k)?.to_le_bytes());
    match file {
        TensorFile::Dense(t) => push_f64s(&mut buf, t.entries()),
        TensorFile::Factored(t) => {
            if !t.is_symmetric() {
                return Err(Error::InvalidArgument("container stores symmetric factored tensors only".into()));
            }
            push_f64s(&mut buf, t.weights().iter());
            push_f64s(&mut buf, &column_major(t.components()));
        }
        TensorFile::Matrix(m) => push_f64s(&mut buf, &column_major(m)),
    }
    Ok(buf)
}

pub fn decode(bytes: &[u8]) -> Result<TensorFile> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("truncated header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", bytes[4])));
    }
    let kind = TensorKind::from_code(bytes[5])?;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let k = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    let expected = match kind {
        TensorKind::Dense => {
            if d > DENSE_DIM_LIMIT {
                return Err(Error::Resource(format!("dense payload with d = {d}")));
            }
            d * d * d
        }
        TensorKind::Factored => k + d * k,
        TensorKind::Matrix => d * k,
    };
    if payload.len() != expected * 8 {
        return Err(Error::Format(format!("payload holds {} bytes, expected {}", payload.len(), expected * 8)));
    }
    let values: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let from_cols = |vals: &[f64]| {
        Array2::from_shape_vec((k, d), vals.to_vec()).map(|m| m.reversed_axes().as_standard_layout().to_owned())
    };
    Ok(match kind {
        TensorKind::Dense => {
            let t = DenseTensor3::from_entries(d, values, false)?;
            TensorFile::Dense(if t.check_symmetric(SYMMETRY_TOL) { t.mark_symmetric()? } else { t })
        }
        TensorKind::Factored => {
            let weights = Array1::from(values[..k].to_vec());
            let comps = from_cols(&values[k..]).map_err(|e| Error::Format(e.to_string()))?;
            TensorFile::Factored(FactoredTensor3::new(comps, weights)?)
        }
        TensorKind::Matrix => TensorFile::Matrix(from_cols(&values).map_err(|e| Error::Format(e.to_string()))?),
    })
}

/// Writes the container and its JSON sidecar.
pub fn write_tensor(
    path: &Path,
    file: &TensorFile,
    seed: Option<u64>,
    provenance: &str,
    config_hash: Option<&str>,
) -> Result<()> {
    let bytes = encode(file)?;
    fs::File::create(path)?.write_all(&bytes)?;
    let (dim, rank) = file.dims();
    let sidecar = Sidecar {
        kind: file.kind(),
        dim,
        rank,
        seed,
        provenance: provenance.to_string(),
        config_hash: config_hash.map(str::to_string),
    };
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<TensorFile> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    Ok(serde_json::from_slice(&fs::read(sidecar_path(path))?)?)
}
