//! File formats: trajectory CSV, policy tables, learner checkpoints,
//! JSON configuration, and calibration histograms.

mod histogram;
mod policy_file;
mod trajectory;

pub use histogram::{acceleration_histogram, front_gaps, headway_histogram, Histogram};
pub use policy_file::{
    parse_policy, read_learner_checkpoint, read_policy, read_visits, write_learner_checkpoint, write_policy,
    write_visits,
    PolicyHeader,
};
pub use trajectory::{
    convert_ngsim, parse_trajectories, parse_trajectories_from, write_trajectories,
    write_trajectories_to, ParseMode, ParseOptions, TrajectoryRecord, TrajectorySet,
};

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Read a JSON document into `T`.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Write `value` as pretty-printed JSON.
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_file(path, text.as_bytes())
}

/// Write `rows` as CSV with a header taken from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_file(path, &bytes)
}

/// Write `text`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, text.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
