//! Joint fitness, cooperative coevolution of views and policies (CC-SSL),
//! and the matched single-population evolutionary algorithm (EA-SSL).

mod config;
mod fitness;
mod operators;
mod search;

pub use config::{OperatorProbs, SearchConfig};
pub use fitness::{scalar_fitness, EvalContext, EvalRecord, FinalEval, FitnessWeights};
pub use operators::{elite_indices, tournament_select};
pub use search::{
    run_ccssl, run_eassl, GenerationLog, PairSnapshot, PopulationSnapshot, SearchOutcome, SearchDiversity,
};
