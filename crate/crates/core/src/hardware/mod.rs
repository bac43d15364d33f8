//! Hardware indicators: FLOPs, parameters and lookup-table latency.

mod cost;
mod lut;

pub use cost::{
    count_flops, estimate_latency, min_completion_flops, min_completion_latency, Aggregate, CostBreakdown,
    CostModel, CostRecord, Metric, CLASSIFIER_OP, REDUCTION_OP, STEM_OP,
};
pub use lut::{load_latency_table, LatencyKey, LatencyTable, HEADER, OVERHEAD_OP};
