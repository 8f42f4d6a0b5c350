//! One line of `runs.jsonl`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub cell_hash: String,
    pub status: CellStatus,
    pub error: Option<String>,
    pub method: String,
    pub dataset: String,
    pub lf: f64,
    pub seed: u64,
    pub n_classes: Option<usize>,
    pub test_macro_f1: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub val_macro_f1: Option<f64>,
    pub probe_drop: Option<f64>,
    pub pseudo_added: Option<usize>,
    /// Validation minus test MacroF1.
    pub optimism: Option<f64>,
    pub split_hash: Option<String>,
    pub duration_s: f64,
    pub gtt: Option<usize>,
    pub ttt: Option<f64>,
    pub best_fitness: Option<f64>,
    pub init_calls: Option<u64>,
    pub search_calls: Option<u64>,
    pub warning: Option<String>,
}

impl RunSummary {
    pub fn failed(run_id: String, cell_hash: String, method: &str, dataset: &str, lf: f64, seed: u64, error: String) -> Self {
        Self {
            run_id,
            cell_hash,
            status: CellStatus::Failed,
            error: Some(error),
            method: method.into(),
            dataset: dataset.into(),
            lf,
            seed,
            n_classes: None,
            test_macro_f1: None,
            test_accuracy: None,
            val_macro_f1: None,
            probe_drop: None,
            pseudo_added: None,
            optimism: None,
            split_hash: None,
            duration_s: 0.0,
            gtt: None,
            ttt: None,
            best_fitness: None,
            init_calls: None,
            search_calls: None,
            warning: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

/// Reads every parseable summary line; unparseable lines (for example a
/// line truncated by an interrupted write) are skipped.
pub fn read_summaries(path: &std::path::Path) -> std::io::Result<Vec<RunSummary>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    Ok(text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect())
}
