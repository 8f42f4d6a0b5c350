//! OpenML dataset download with an on-disk cache.
//!
//! Cache layout under `cache_dir`: `<id>.arff` holds the raw payload and
//! `<id>.meta.json` the [`OpenmlMeta`] record. Datasets are always decoded
//! from the cached files, so online and offline loads are identical.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{arff::parse_arff, Dataset};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchMode {
    /// Use the cache when present, otherwise download.
    Online,
    /// Serve only from the cache.
    Offline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenmlMeta {
    pub id: u64,
    pub name: String,
    pub target: String,
    #[serde(default)]
    pub ignore: Vec<String>,
    pub format: String,
    /// Hex SHA-256 of the cached payload.
    pub sha256: String,
    #[serde(default)]
    pub source_url: String,
}

pub fn cache_paths(cache_dir: &Path, id: u64) -> (PathBuf, PathBuf) {
    (
        cache_dir.join(format!("{id}.arff")),
        cache_dir.join(format!("{id}.meta.json")),
    )
}

pub fn fetch_openml(id: u64, cache_dir: impl AsRef<Path>, mode: FetchMode) -> Result<Dataset> {
    let cache_dir = cache_dir.as_ref();
    let (payload_path, meta_path) = cache_paths(cache_dir, id);
    if !(payload_path.exists() && meta_path.exists()) {
        match mode {
            FetchMode::Offline => {
                return Err(Error::Fetch {
                    id,
                    message: format!("not cached in {} and offline", cache_dir.display()),
                })
            }
            FetchMode::Online => download(id, cache_dir)?,
        }
    }
    load_cached(id, cache_dir)
}

pub fn load_cached(id: u64, cache_dir: &Path) -> Result<Dataset> {
    let (payload_path, meta_path) = cache_paths(cache_dir, id);
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: OpenmlMeta = serde_json::from_str(&meta_text)?;
    let payload = std::fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    let digest = hex::encode(Sha256::digest(&payload));
    if digest != meta.sha256 {
        return Err(Error::Fetch {
            id,
            message: format!("cached payload checksum mismatch ({digest} != {})", meta.sha256),
        });
    }
    if !meta.format.eq_ignore_ascii_case("arff") {
        return Err(Error::UnsupportedFormat(format!("OpenML format '{}'", meta.format)));
    }
    let text = String::from_utf8_lossy(&payload);
    let mut ds = parse_arff(&text, &meta.target, &meta.ignore)?;
    ds.name = meta.name;
    Ok(ds)
}

/// Writes a payload and its metadata into the cache.
pub fn store_in_cache(
    cache_dir: &Path,
    id: u64,
    name: &str,
    target: &str,
    ignore: Vec<String>,
    payload: &[u8],
    source_url: &str,
) -> Result<OpenmlMeta> {
    std::fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
    let (payload_path, meta_path) = cache_paths(cache_dir, id);
    let meta = OpenmlMeta {
        id,
        name: name.to_string(),
        target: target.to_string(),
        ignore,
        format: "ARFF".into(),
        sha256: hex::encode(Sha256::digest(payload)),
        source_url: source_url.to_string(),
    };
    std::fs::write(&payload_path, payload).map_err(|e| Error::io(&payload_path, e))?;
    std::fs::write(&meta_path, serde_json::to_vec_pretty(&meta)?)
        .map_err(|e| Error::io(&meta_path, e))?;
    Ok(meta)
}

fn string_list(v: Option<&serde_json::Value>) -> Vec<String> {
    match v {
        Some(serde_json::Value::String(s)) => s.split(',').map(|p| p.trim().to_string()).collect(),
        Some(serde_json::Value::Array(items)) => items
            .iter()
            .filter_map(|i| i.as_str().map(str::to_string))
            .collect(),
        _ => Vec::new(),
    }
}

#[cfg(feature = "openml-fetch")]
fn download(id: u64, cache_dir: &Path) -> Result<()> {
    use std::io::Read;

    let fetch_err = |message: String| Error::Fetch { id, message };
    let desc_url = format!("https://www.openml.org/api/v1/json/data/{id}");
    let desc: serde_json::Value = ureq::get(&desc_url)
        .call()
        .map_err(|e| fetch_err(e.to_string()))?
        .into_json()
        .map_err(|e| fetch_err(e.to_string()))?;
    let d = desc
        .get("data_set_description")
        .ok_or_else(|| fetch_err("missing data_set_description".into()))?;
    let field = |k: &str| d.get(k).and_then(|v| v.as_str()).map(str::to_string);
    let format = field("format").unwrap_or_else(|| "ARFF".into());
    if !format.eq_ignore_ascii_case("arff") && !format.eq_ignore_ascii_case("sparse_arff") {
        return Err(Error::UnsupportedFormat(format!("OpenML format '{format}'")));
    }
    let name = field("name").unwrap_or_else(|| format!("openml-{id}"));
    let target = field("default_target_attribute")
        .ok_or_else(|| fetch_err("no default target attribute".into()))?;
    let url = field("url").ok_or_else(|| fetch_err("no download url".into()))?;
    let mut ignore = string_list(d.get("ignore_attribute"));
    ignore.extend(string_list(d.get("row_id_attribute")));

    let mut payload = Vec::new();
    ureq::get(&url)
        .call()
        .map_err(|e| fetch_err(e.to_string()))?
        .into_reader()
        .read_to_end(&mut payload)
        .map_err(|e| fetch_err(e.to_string()))?;
    store_in_cache(cache_dir, id, &name, &target, ignore, &payload, &url)?;
    Ok(())
}

#[cfg(not(feature = "openml-fetch"))]
fn download(id: u64, _cache_dir: &Path) -> Result<()> {
    Err(Error::Fetch {
        id,
        message: "built without the openml-fetch feature".into(),
    })
}
