//! Hierarchical SSB sensing: periodogram range-velocity profiling followed by
//! 2D beamspace MUSIC on locally gathered snapshots.

mod detect;
mod music;
mod pipeline;
mod profile;
mod rx_beamformer;

pub use detect::{detect_peaks, DdAxes, Detection, DetectorConfig};
pub use music::{beamspace_steering, estimate_source_count, music_spectrum, AngleGrid, MusicConfig, MusicPeak, MusicSpectrum};
pub use pipeline::{process_echo, sense_burst, BurstReport, Measurement, SensingConfig, SensingSetup};
pub use profile::{
    combined_dd_map, dd_map, delay_doppler, delay_profiles, doppler_transform, gather_snapshots, ls_cfr, Cfr,
    DelayDopplerCube,
};
pub use rx_beamformer::{design_rx_beamformer, dft_matrix, RxSensingBeamformer};
