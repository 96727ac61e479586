//! End-to-end processing of one SSB echo.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{sensing_echo, ReceivedGrid, SensingTargetParams};
use crate::radio::{build_ssb_grid, ssb_tx_beamformer, RadioConfig, SsbBeam, SsbGrid, UpaConfig};
use crate::sensing::detect::{detect_peaks, DdAxes, Detection, DetectorConfig};
use crate::sensing::music::{music_spectrum, AngleGrid, MusicConfig, MusicSpectrum};
use crate::sensing::profile::{combined_dd_map, delay_profiles, gather_snapshots, ls_cfr};
use crate::sensing::rx_beamformer::{design_rx_beamformer, RxSensingBeamformer};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensingConfig {
    pub n_idft: usize,
    pub m_dft: usize,
    /// Snapshot window half-width `w_r` (delay bins).
    pub window_half_width: usize,
    /// Transmit power per resource element (W).
    pub tx_power_per_re: f64,
    /// Receive noise power per resource element and RF chain (W).
    pub noise_power: f64,
    pub payload_seed: u64,
    pub detector: DetectorConfig,
    pub music: MusicConfig,
}

impl Default for SensingConfig {
    fn default() -> Self {
        Self {
            n_idft: 256,
            m_dft: 64,
            window_half_width: 2,
            // 30 dBm spread over the 240 SSB subcarriers
            tx_power_per_re: 1.0 / 240.0,
            // kT * 120 kHz * 7 dB noise figure
            noise_power: 1.380649e-23 * 290.0 * 120e3 * 10f64.powf(0.7),
            payload_seed: 0,
            detector: DetectorConfig::default(),
            music: MusicConfig::default(),
        }
    }
}

/// Everything fixed across bursts: numerology, arrays, the SSB grid and the
/// MUSIC search grid over the coverage region.
#[derive(Debug, Clone)]
pub struct SensingSetup {
    pub radio: RadioConfig,
    pub tx: UpaConfig,
    pub rx: UpaConfig,
    pub ssb: SsbGrid,
    pub angle_grid: AngleGrid,
    pub config: SensingConfig,
}

impl SensingSetup {
    /// `el_range`, `az_range` in radians.
    pub fn new(
        radio: RadioConfig,
        tx: UpaConfig,
        rx: UpaConfig,
        config: SensingConfig,
        el_range: (f64, f64),
        az_range: (f64, f64),
    ) -> Result<Self> {
        radio.validate()?;
        tx.validate()?;
        rx.validate()?;
        if config.window_half_width * 2 + 1 > config.n_idft {
            return Err(Error::InvalidConfig("snapshot window wider than the delay axis".into()));
        }
        if config.noise_power < 0.0 || config.tx_power_per_re < 0.0 {
            return Err(Error::InvalidConfig("powers must be non-negative".into()));
        }
        let angle_grid = AngleGrid::uniform(el_range, az_range, config.music.grid_step_deg.to_radians())?;
        Ok(Self { radio, tx, rx, ssb: build_ssb_grid(config.payload_seed), angle_grid, config })
    }

    pub fn axes(&self) -> DdAxes {
        DdAxes::new(&self.radio, self.config.n_idft, self.config.m_dft)
    }
}

/// Sensed target: one DD peak paired with one MUSIC peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub range: f64,
    pub velocity: f64,
    pub elevation: f64,
    pub azimuth: f64,
    pub music_value: f64,
    pub dd_power: f64,
}

#[derive(Debug, Clone)]
pub struct BurstReport {
    pub dd_map: DMatrix<f64>,
    pub detections: Vec<Detection>,
    /// One spectrum per detection.
    pub spectra: Vec<MusicSpectrum>,
    pub measurements: Vec<Measurement>,
}

/// LS CFR, delay-Doppler map, detection and per-peak MUSIC on a received grid.
pub fn process_echo(rx: &ReceivedGrid, w_rx: &RxSensingBeamformer, setup: &SensingSetup) -> Result<BurstReport> {
    let cfg = &setup.config;
    let cfr = ls_cfr(rx, &setup.ssb)?;
    let profiles = delay_profiles(&cfr, cfg.n_idft)?;
    let dd_map = combined_dd_map(&profiles, cfg.m_dft)?;
    let detections = detect_peaks(&dd_map, &setup.axes(), &cfg.detector);
    // each delay bin sums the noise of every occupied subcarrier of its symbol
    let noise_eigenvalue = cfg.noise_power * setup.ssb.occupied_count() as f64 / setup.ssb.n_sym() as f64;
    let mut spectra = Vec::with_capacity(detections.len());
    let mut measurements = Vec::new();
    for det in &detections {
        let y = gather_snapshots(&profiles, det, cfg.window_half_width)?;
        let spectrum = music_spectrum(&y, &w_rx.matrix, &setup.rx, &setup.radio, &setup.angle_grid, &cfg.music, Some(noise_eigenvalue))?;
        for p in &spectrum.peaks {
            measurements.push(Measurement {
                range: det.range,
                velocity: det.velocity,
                elevation: p.elevation,
                azimuth: p.azimuth,
                music_value: p.value,
                dd_power: det.power,
            });
        }
        spectra.push(spectrum);
    }
    Ok(BurstReport { dd_map, detections, spectra, measurements })
}

/// Transmits one SSB towards `beam`, synthesises the echo off `targets` and
/// processes it with the beam's locally-focused receive combiner.
pub fn sense_burst<R: Rng + ?Sized>(
    targets: &[SensingTargetParams],
    beam: &SsbBeam,
    setup: &SensingSetup,
    rng: &mut R,
) -> Result<BurstReport> {
    let w_tx = ssb_tx_beamformer(&setup.tx, &setup.radio, beam).weights().scale(setup.config.tx_power_per_re.sqrt());
    let w_rx = design_rx_beamformer(&setup.rx, &setup.radio, beam);
    let rx = sensing_echo(
        targets,
        &setup.ssb,
        &w_tx,
        &w_rx.matrix,
        &setup.tx,
        &setup.rx,
        &setup.radio,
        setup.config.noise_power,
        rng,
    );
    process_echo(&rx, &w_rx, setup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{truth_to_params, UavTruth};
    use nalgebra::Vector3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn desk_setup() -> SensingSetup {
        let radio = RadioConfig::fr2_default();
        let arr = UpaConfig::half_wavelength(8, 4, 4, 2, &radio).unwrap();
        SensingSetup::new(
            radio,
            arr,
            arr,
            SensingConfig::default(),
            (0.0, 45f64.to_radians()),
            (-60f64.to_radians(), 60f64.to_radians()),
        )
        .unwrap()
    }

    fn uav_at(range: f64, el_deg: f64, az_deg: f64, v: f64) -> UavTruth {
        let (el, az) = (el_deg.to_radians(), az_deg.to_radians());
        let dir = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
        UavTruth { position: dir * range, velocity: dir * v, rcs: 1.0 }
    }

    #[test]
    fn empty_scene_gives_nothing() {
        let setup = desk_setup();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let beam = SsbBeam { elevation: 0.2, azimuth: 0.1, el_width: 0.2, az_width: 0.13 };
        let rep = sense_burst(&[], &beam, &setup, &mut rng).unwrap();
        assert!(rep.measurements.is_empty());
    }

    #[test]
    fn single_target_within_one_bin() {
        let setup = desk_setup();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let u = uav_at(80.0, 12.0, -20.0, 6.0);
        let t = truth_to_params(&u, &setup.radio, &mut rng).unwrap();
        let deg = 1f64.to_radians();
        let beam = SsbBeam { elevation: 12.0 * deg, azimuth: -20.0 * deg, el_width: 11.25 * deg, az_width: 7.5 * deg };
        let rep = sense_burst(&[t], &beam, &setup, &mut rng).unwrap();
        assert_eq!(rep.measurements.len(), 1, "{:?}", rep.measurements);
        let m = rep.measurements[0];
        let axes = setup.axes();
        assert!((m.range - 80.0).abs() <= axes.range_bin);
        assert!((m.velocity - 6.0).abs() <= axes.velocity_bin);
        assert!((m.elevation - 12.0 * deg).abs() <= 1.5 * deg);
        assert!((m.azimuth + 20.0 * deg).abs() <= 1.5 * deg);
    }
}
