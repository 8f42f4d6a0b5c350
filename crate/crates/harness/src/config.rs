//! Experiment configuration file.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use evossl_core::baselines::{BaselineConfig, BaselineMethod};
use evossl_core::data::{SplitProportions, TwoGaussians};
use evossl_core::evolution::SearchConfig;
use serde::{Deserialize, Serialize};

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSpec {
    Csv { path: PathBuf, label: String },
    Openml { id: u64 },
    Synthetic(TwoGaussians),
}

impl DatasetSpec {
    /// Short stable label used in run ids and reports.
    pub fn label(&self) -> String {
        match self {
            DatasetSpec::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "csv".into()),
            DatasetSpec::Openml { id } => format!("openml-{id}"),
            DatasetSpec::Synthetic(s) => s.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ccssl,
    Eassl,
    St,
    Hco,
    Ls,
    LrRef,
    SvmRef,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Ccssl => "ccssl",
            Method::Eassl => "eassl",
            other => other.baseline().expect("baseline").tag(),
        }
    }

    pub fn is_search(&self) -> bool {
        matches!(self, Method::Ccssl | Method::Eassl)
    }

    pub fn baseline(&self) -> Option<BaselineMethod> {
        match self {
            Method::Ccssl | Method::Eassl => None,
            Method::St => Some(BaselineMethod::St),
            Method::Hco => Some(BaselineMethod::Hco),
            Method::Ls => Some(BaselineMethod::Ls),
            Method::LrRef => Some(BaselineMethod::LrRef),
            Method::SvmRef => Some(BaselineMethod::SvmRef),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Settings read only by `evossl tune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneConfig {
    /// OpenML ids that tuning may touch without `--force`.
    pub dev_openml_ids: Vec<u64>,
    /// Run only the first `limit` grid points (smoke runs).
    pub limit: Option<usize>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self { dev_openml_ids: vec![28, 44, 46], limit: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSpec>,
    pub lfs: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub baselines: BaselineConfig,
    pub output_dir: PathBuf,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub split: SplitProportions,
    /// Dataset cache; falls back to `EVOSSL_CACHE`, then `.evossl-cache`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub offline: bool,
    /// Also write every joint evaluation to `evaluations/<run_id>.jsonl`.
    #[serde(default)]
    pub log_evaluations: bool,
    #[serde(default)]
    pub tune: TuneConfig,
}

fn one() -> usize {
    1
}

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    /// Schema violation with the JSON path of the offending field.
    Schema { path: String, message: String },
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Schema { path, message } => write!(f, "config field `{path}`: {message}"),
            ConfigError::Invalid(m) => write!(f, "invalid config: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let schema = |path: &str, message: &str| ConfigError::Schema { path: path.into(), message: message.into() };
        if self.datasets.is_empty() {
            return Err(schema("datasets", "must not be empty"));
        }
        if self.lfs.is_empty() {
            return Err(schema("lfs", "must not be empty"));
        }
        if let Some((i, lf)) = self.lfs.iter().enumerate().find(|(_, lf)| !(**lf > 0.0 && **lf <= 1.0)) {
            return Err(schema(&format!("lfs[{i}]"), &format!("{lf} outside (0, 1]")));
        }
        if self.seeds.is_empty() {
            return Err(schema("seeds", "must not be empty"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(schema("seeds", "seeds must be distinct"));
        }
        if self.methods.is_empty() {
            return Err(schema("methods", "must not be empty"));
        }
        if self.workers == 0 {
            return Err(schema("workers", "must be at least 1"));
        }
        self.search.validate().map_err(|e| schema("search", &e.to_string()))?;
        self.baselines.validate().map_err(|e| schema("baselines", &e.to_string()))?;
        self.split.validate().map_err(|e| schema("split", &e.to_string()))?;
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        resolve_cache_dir(self.cache_dir.as_deref())
    }
}

/// Explicit directory, else `EVOSSL_CACHE`, else `.evossl-cache`.
pub fn resolve_cache_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    std::env::var_os("EVOSSL_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".evossl-cache"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "datasets": [{"source": "openml", "id": 15}, {"source": "synthetic", "n": 200, "d": 4, "informative": 2, "shift": 1.0, "seed": 0}],
        "lfs": [0.1],
        "seeds": [0, 1],
        "methods": ["ccssl", "st"],
        "output_dir": "out"
    }"#;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.workers, 1);
        assert_eq!(c.search, SearchConfig::frozen());
        assert_eq!(c.datasets[0].label(), "openml-15");
    }

    #[test]
    fn schema_error_names_field() {
        let bad = MINIMAL.replace(r#""lfs": [0.1]"#, r#""lfs": ["x"]"#);
        match ExperimentConfig::from_json(&bad) {
            Err(ConfigError::Schema { path, .. }) => assert_eq!(path, "lfs[0]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_seeds_rejected() {
        let bad = MINIMAL.replace("[0, 1]", "[3, 3]");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(ConfigError::Schema { .. })));
    }

    #[test]
    fn nested_search_field_path() {
        let bad = MINIMAL.replace(r#""output_dir""#, r#""search": {"k": "three"}, "output_dir""#);
        match ExperimentConfig::from_json(&bad) {
            Err(ConfigError::Schema { path, .. }) => assert_eq!(path, "search.k"),
            other => panic!("{other:?}"),
        }
    }
}
