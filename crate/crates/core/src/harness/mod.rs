//! Experiment protocol: synthetic populations, replicated simulations with
//! their metrics, the HDSC benchmark, airline-style preprocessing and
//! divide-and-conquer least squares.

mod bench;
mod experiment;
mod flights;
mod ols;
mod population;
mod windows;

pub use bench::{bench_hdsc, BenchConfig, BenchRow, CacheMode};
pub use experiment::{
    estimate_store, prepare_store, run_experiment, run_replication, statistics_for_batch,
    ComponentMetrics, Example, ExperimentConfig, MetricsReport, ReplicationResult, StoreEstimate,
};
pub use flights::{
    departure_bin, generate_flights_raw, preprocess_flights, DepartureBin, FlightsParams,
    PreprocessSummary, FLIGHTS_COLUMNS,
};
pub use ols::{chunked_ols, ChunkedOls};
pub use population::{
    format_field, generate_dataset, sidecar_path, write_sidecar, GeneratedDataset, PopulationKind,
    PopulationSpec, RowGenerator,
};
pub use windows::{exact_all_windows_mean, AllWindowsMean};
