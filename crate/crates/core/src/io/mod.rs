//! Dataset directories, content/cites conversion and run-config files.
//!
//! A dataset directory holds headerless tab-separated files:
//!
//! - `meta.tsv`: `name`, `classes`, `features` as key/value lines
//! - `features.tsv`: node id followed by `features` floats
//! - `labels.tsv`: node id and integer class
//! - `edges.tsv`: two node ids per undirected edge; duplicates and
//!   self-loops are cleaned on load
//! - `splits.tsv` (optional): node id and one of `train`, `val`, `test`

mod convert;
mod dataset;

use std::fs;
use std::path::Path;

pub use convert::{convert_content_cites, ConversionLog};
pub use dataset::{
    load_dataset, save_dataset, DatasetMeta, EDGES_FILE, FEATURES_FILE, LABELS_FILE, META_FILE, SPLITS_FILE,
};

use crate::error::{Error, Result};
use crate::trainer::TrainConfig;

/// Reads a TOML run config; every key is range-checked before returning.
pub fn load_run_config(path: &Path) -> Result<TrainConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TrainConfig::from_toml_str(&text).map_err(|e| match e {
        Error::InvalidArgument(message) => Error::Config {
            file: path.display().to_string(),
            message,
        },
        other => other,
    })
}
