//! Pruning search over the supernet: every candidate removal is scored by
//! the change it causes in each indicator, candidates are ranked per
//! indicator, and the weighted rank sum decides what goes.

mod engine;
pub(crate) mod rank;

pub use engine::{run_search, Engine, PruneRecord, Schedule, SearchConfig, SearchReport, StateScores};
pub use rank::{kappa_delta, rank_aggregate, CandidateDeltas, RankedCandidate, Ranks, Weights};
