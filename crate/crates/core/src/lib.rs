//! Two-view pseudo-labeling semi-supervised learning for tabular data, with
//! evolutionary search over its coupled design choices.
//!
//! The crate is organized bottom-up:
//!
//! - [`data`]: ingestion (CSV, ARFF, OpenML cache), preprocessing and
//!   deterministic stratified partitioning.
//! - [`linear`]: the base learners (multinomial logistic regression, linear SVM).
//! - [`views`] and [`policy`]: the two evolvable components and their
//!   variation/repair operators.
//! - [`ssl`]: the pseudo-labeling loop driven by a view pair and a policy.
//! - [`evolution`]: joint fitness, cooperative coevolution (CC-SSL) and the
//!   monolithic EA (EA-SSL).
//! - [`baselines`]: self-training, heuristic co-training, label spreading and
//!   supervised linear references.
//! - [`metrics`]: scores, diversity, cost-to-target, Wilcoxon tests, win counts.
//!
//! Data-parallel work (joint evaluations within a generation) runs through
//! [`exec::Executor`], backed by rayon when the `parallel` feature is on.

pub mod baselines;
pub mod data;
pub mod error;
pub mod evolution;
pub mod exec;
pub mod linear;
pub mod metrics;
pub mod policy;
pub mod seed;
pub mod ssl;
pub mod views;

pub use error::{Error, Result};
