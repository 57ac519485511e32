//! Command-line orchestration: ingestion, preprocessing, the clustering
//! pipeline, simulation benchmarks and diagnostics.

pub mod benchmark;
pub mod io;
pub mod pipeline;
pub mod preprocess;
pub mod simulate;

pub use benchmark::{benchmark, BenchmarkConfig, BenchmarkResult};
pub use pipeline::{format_report, run_pipeline, Method, PipelineConfig, RunReport};
pub use preprocess::{boxcox_transform, Preprocessing};
