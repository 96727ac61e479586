//! Sensing-assisted predictive beamforming for high-mobility UAV links.
//!
//! The crate is organised along the processing chain of a hybrid-array base
//! station that reuses its periodic SSB bursts as a monostatic radar:
//!
//! - [`radio`]: array geometry, steering vectors, SSB resource grid and the
//!   SS-burst sweep plan.
//! - [`channel`]: ground-truth echo and communication channel synthesis.
//! - [`sensing`]: LS channel estimation, delay-Doppler profiling, peak
//!   detection and 2D beamspace MUSIC.
//! - [`tracker`]: per-UAV EKF with innovation-based covariance correction.
//! - [`beamforming`]: uncertainty-aware channel correlation, SDR-SCA sum-rate
//!   optimisation, Gaussian randomisation and hybrid factorisation.
//! - [`sim`]: scenario files, trajectories, the two-phase simulation loop, the
//!   feedback baseline and parameter sweeps.

pub mod beamforming;
pub mod channel;
pub mod error;
pub mod linalg;
pub mod radio;
pub mod sensing;
pub mod sim;
pub mod tracker;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
