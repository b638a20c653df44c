//! Atomic artifact writing and CSV rows.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimator::EstimateResult;

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// One row of an estimate CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub quantity: String,
    pub param_index: Option<usize>,
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

impl From<&EstimateResult> for EstimateRow {
    fn from(r: &EstimateResult) -> Self {
        EstimateRow {
            quantity: r.quantity.name().to_string(),
            param_index: r.param_index,
            mean: r.mean,
            stderr: r.stderr,
            samples: r.samples,
            seed: r.seed,
        }
    }
}

/// Serializes rows with a header into CSV bytes.
pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?)
}
