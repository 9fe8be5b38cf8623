//! Experiment plumbing: TOML configuration, baseline and policy evaluation
//! runs, persisted episode records, travel-time metrics, histograms and the
//! ramp-metering signature.

mod config;
mod metrics;
mod records;
mod run;

pub use config::{ExperimentConfig, NoiseConfig, OUTPUT_DIR_ENV};
pub use metrics::{
    compute_metrics, histogram, histogram_values, mean_travel_time, metering_entrance, metering_signature,
    percent_time_saved, vehicle_metrics, EntranceStats, HistogramMetric, HistogramSpec, MeteringSignature,
    MetricsSummary, METERING_SLOWDOWN, STOP_SPEED, THROUGHPUT_TOLERANCE,
};
pub use records::{read_records, write_records, EpisodeRecord, StepRecord, VehicleRecord, RECORD_SCHEMA};
pub use run::{
    evaluation_channel, record_episode, run_baseline, run_policy, run_policy_params, train, trial_seed, TrainArtifacts,
    TrainMode,
};
