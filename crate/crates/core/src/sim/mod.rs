//! Scenario simulation, metrics and Monte-Carlo evaluation.

mod config;
mod metrics;
#[cfg(feature = "plot")]
mod plot;
mod runner;
mod scenario;

pub use config::{BirthKind, Case, ScenarioConfig, Topology};
pub use metrics::{ospa, ospa2_windowed, ospa_from_distances, TrackHistory};
#[cfg(feature = "plot")]
pub use plot::plot_summaries;
pub use runner::{
    average, monte_carlo, output_stem, read_summary, recompute_dir, run_metrics, run_seed, run_single, write_outputs,
    MetricParams, Method, MonteCarlo, RunOutput, StepSummary, TrackRow, ESTIMATE, TRUTH,
};
pub use scenario::{
    case_a_sensor_positions, generate_measurements, generate_truth, sensor_move, sensor_trajectories, GroundTruth,
    TargetTrack,
};
