//! Mobile single-user scenario: trajectory, scatterers, pathloss, and the
//! Monte Carlo experiments built on top of them.

mod config;
mod engine;
mod experiment;
mod geometry;
mod streams;

pub use config::{db_to_linear, Grid, Point, ScenarioConfig, Violation};
pub use engine::{BlockResult, Method, Simulator, TrialState, WindowResult};
pub use experiment::{
    ci95_half_width, experiment_se_vs_snr, experiment_se_vs_snr_ordered, experiment_se_vs_time,
    experiment_se_vs_time_ordered, mean, sample_sd, trial_groups, tx_power_for_snr, BlockSe, ExecutionOrder, Experiment,
    ExperimentOutcome, SeRecord, MAX_JACKKNIFE_GROUPS,
};
pub use geometry::{
    angles_from_geometry, arrival_angle, departure_angle, pathloss_db, place_clusters, placement_region, ue_position,
    WindowGeometry,
};
pub use streams::{Purpose, StreamKey};
