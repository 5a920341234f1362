//! Loading the canonical trust and ratings TSV files.

use std::fs;
use std::path::{Path, PathBuf};

use ahntp_core::data::{parse_ratings, parse_trust, DataError, LoadReport, TrustDataset};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Data { path: PathBuf, source: DataError },
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_owned(), source })
}

/// Loads a trust file and an optional ratings file.
pub fn load_dataset(trust: &Path, ratings: Option<&Path>) -> Result<(TrustDataset, LoadReport), LoadError> {
    let edges = parse_trust(&read(trust)?).map_err(with_path(trust))?;
    let records = match ratings {
        Some(p) => parse_ratings(&read(p)?).map_err(with_path(p))?,
        None => Vec::new(),
    };
    TrustDataset::from_records(&edges, &records).map_err(with_path(trust))
}

fn with_path(path: &Path) -> impl Fn(DataError) -> LoadError + '_ {
    move |source| LoadError::Data { path: path.to_owned(), source }
}
