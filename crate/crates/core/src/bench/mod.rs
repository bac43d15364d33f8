//! Evaluation harness: rank correlation of indicators against externally
//! measured accuracies, and comparison tables.

mod kendall;
mod records;
mod report;
mod sweep;

pub use kendall::kendall_tau;
pub use records::{load_bench, read_bench, BenchRecord};
pub use report::{compare_report, format_speedup, read_entries, CompareReport, Figure, ReportEntry, ReportRow};
pub use sweep::{proxy_scores, subsample, tau_sweep, SweepAxis, TauConfig, TauPoint, TauProxy, TauReport};
