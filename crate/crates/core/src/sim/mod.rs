//! Scenario files, ground-truth trajectories, the sensing-assisted and
//! feedback-based simulation loops, sweeps and CSV output.

pub mod calibrate;
pub mod config;
pub mod output;
pub mod run;
pub mod sweep;
pub mod trajectory;

pub use calibrate::{calibrate_meas_noise, Calibration};
pub use config::{Scenario, ScenarioConfig, SweepAxis};
pub use run::{run_baseline, run_proposed, sense_scene, simulate, track_measurements, track_scene, Codebook, RateRow, Scheme, SimOutput, TrackRow};
pub use sweep::{sweep_experiment, SweepRow};
pub use trajectory::propagate_truth;
