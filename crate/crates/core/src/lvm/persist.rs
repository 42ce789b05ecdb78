use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SampleBatch;
use crate::error::{Error, Result};
use crate::tensor::{read_tensor, write_tensor, TensorFile};

/// JSON metadata stored beside a persisted batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchMetadata {
    pub dim: usize,
    pub samples: usize,
    pub views: usize,
    pub seed: Option<u64>,
    pub zeta: f64,
    pub priors: Vec<f64>,
    pub model_hash: Option<String>,
    pub labels: Option<Vec<usize>>,
}

fn view_path(stem: &Path, l: usize) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(format!(".view{l}.tpi3"));
    PathBuf::from(s)
}

fn meta_path(stem: &Path) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".batch.json");
    PathBuf::from(s)
}

/// Writes each view as a matrix container `<stem>.view{l}.tpi3` and the
/// metadata as `<stem>.batch.json`.
pub fn save_batch(stem: &Path, batch: &SampleBatch, meta: &BatchMetadata) -> Result<()> {
    for (l, v) in batch.views().iter().enumerate() {
        write_tensor(
            &view_path(stem, l),
            &TensorFile::Matrix(v.clone()),
            meta.seed,
            "sample batch view",
            meta.model_hash.as_deref(),
        )?;
    }
    fs::write(meta_path(stem), serde_json::to_vec_pretty(meta)?)?;
    Ok(())
}

pub fn load_batch(stem: &Path) -> Result<(SampleBatch, BatchMetadata)> {
    let meta: BatchMetadata = serde_json::from_slice(&fs::read(meta_path(stem))?)?;
    let views = (0..meta.views)
        .map(|l| match read_tensor(&view_path(stem, l))? {
            TensorFile::Matrix(m) => Ok(m),
            other => Err(Error::Format(format!("view {l} holds a {:?} container", other.kind()))),
        })
        .collect::<Result<Vec<_>>>()?;
    let batch = SampleBatch::new(views, meta.labels.clone())?;
    Ok((batch, meta))
}
