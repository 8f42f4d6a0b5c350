//! `evossl fetch`: populate the dataset cache.

use std::path::Path;

use anyhow::Result;
use evossl_core::data::{fetch_openml, Dataset, FetchMode};

pub fn fetch(id: u64, cache_dir: &Path, offline: bool) -> Result<Dataset> {
    let mode = if offline { FetchMode::Offline } else { FetchMode::Online };
    Ok(fetch_openml(id, cache_dir, mode)?)
}
