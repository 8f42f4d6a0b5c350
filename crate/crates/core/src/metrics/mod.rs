//! Scoring, diagnostics, diversity, cost-to-target and paired testing.

mod diversity;
mod scores;
mod target;
mod wilcoxon;
mod wins;

pub use diversity::{diversity, jaccard_distance, DiversitySnapshot};
pub use scores::{macro_f1, probe_drop, val_optimism, ScoreReport};
pub use target::{cost_to_target, TargetCost};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult, EXACT_MAX_N};
pub use wins::{count_wins, median, CellResult, WinCell, WinCount, WinTable, SSL_BASELINES};
