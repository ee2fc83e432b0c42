//! Monte Carlo benchmark harness for the `sgp-sysid` solvers: seeded trials
//! over preset x dataset x solver grids, aggregate tables, performance
//! profiles and plot-ready trace series.

pub mod error;
pub mod harness;
pub mod profile;
pub mod traces;

pub use error::{BenchError, Result};
pub use harness::{run_benchmark, AggregateRow, BenchConfig, BenchReport, DatasetSource, TrialRecord};
pub use profile::{performance_profile, PerformanceProfile};
pub use traces::{emit_trace_plots, TraceSeries};
