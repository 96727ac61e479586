//! Array geometry, OFDM numerology, the SSB resource grid and the SS-burst
//! beam sweep.
//!
//! Angle convention: `phi` is elevation, `theta` is azimuth. The array lies in
//! the y-z plane with boresight along +x.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::{CMat, CVec, Error, Result, C64};

/// FR2 limit on SSBs per burst.
pub const MAX_SSB_BEAMS: usize = 64;
/// Subcarriers spanned by one SSB.
pub const SSB_SUBCARRIERS: usize = 240;
/// OFDM symbols spanned by one SSB.
pub const SSB_SYMBOLS: usize = 4;

/// Carrier and OFDM numerology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    /// Carrier frequency (Hz).
    pub carrier_hz: f64,
    /// Subcarrier spacing (Hz).
    pub subcarrier_spacing_hz: f64,
    /// OFDM symbol duration including cyclic prefix (s).
    pub symbol_duration_s: f64,
    /// Propagation speed (m/s).
    #[serde(default = "default_c0")]
    pub speed_of_light: f64,
}

fn default_c0() -> f64 {
    3.0e8
}

impl RadioConfig {
    pub fn new(carrier_hz: f64, subcarrier_spacing_hz: f64, symbol_duration_s: f64) -> Result<Self> {
        let cfg = Self {
            carrier_hz,
            subcarrier_spacing_hz,
            symbol_duration_s,
            speed_of_light: default_c0(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 28 GHz carrier, 120 kHz spacing, 8.9 us symbols.
    pub fn fr2_default() -> Self {
        Self::new(28e9, 120e3, 8.9e-6).expect("static numerology is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz > 0.0) || !(self.subcarrier_spacing_hz > 0.0) || !(self.speed_of_light > 0.0) {
            return Err(Error::InvalidConfig("carrier, subcarrier spacing and c0 must be positive".into()));
        }
        // cyclic prefix makes the symbol at least one useful period long
        if self.symbol_duration_s < 1.0 / self.subcarrier_spacing_hz * (1.0 - 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "symbol duration {} s shorter than 1/delta_f = {} s",
                self.symbol_duration_s,
                1.0 / self.subcarrier_spacing_hz
            )));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        self.speed_of_light / self.carrier_hz
    }
}

/// Uniform planar array in the y-z plane driven by a fully connected hybrid
/// front end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpaConfig {
    pub n_y: usize,
    pub n_z: usize,
    pub n_rf_y: usize,
    pub n_rf_z: usize,
    /// Element spacing along y (m).
    pub d_y: f64,
    /// Element spacing along z (m).
    pub d_z: f64,
}

impl UpaConfig {
    /// Array with half-wavelength spacing on both axes.
    pub fn half_wavelength(n_y: usize, n_z: usize, n_rf_y: usize, n_rf_z: usize, radio: &RadioConfig) -> Result<Self> {
        let d = radio.wavelength() / 2.0;
        let cfg = Self { n_y, n_z, n_rf_y, n_rf_z, d_y: d, d_z: d };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_y == 0 || self.n_z == 0 || self.n_rf_y == 0 || self.n_rf_z == 0 {
            return Err(Error::InvalidConfig("array and RF chain counts must be positive".into()));
        }
        if self.n_rf_y > self.n_y || self.n_rf_z > self.n_z {
            return Err(Error::InvalidConfig(format!(
                "RF chains ({}x{}) exceed elements ({}x{})",
                self.n_rf_y, self.n_rf_z, self.n_y, self.n_z
            )));
        }
        if !(self.d_y > 0.0) || !(self.d_z > 0.0) {
            return Err(Error::InvalidConfig("element spacing must be positive".into()));
        }
        Ok(())
    }

    pub fn n_elements(&self) -> usize {
        self.n_y * self.n_z
    }

    pub fn n_rf(&self) -> usize {
        self.n_rf_y * self.n_rf_z
    }
}

/// z-axis factor `a_z(phi)` of the steering vector.
pub fn steering_z(cfg: &UpaConfig, radio: &RadioConfig, phi: f64) -> CVec {
    let k = 2.0 * PI * cfg.d_z * phi.sin() / radio.wavelength();
    CVec::from_fn(cfg.n_z, |p, _| C64::from_polar(1.0, k * p as f64))
}

/// y-axis factor `a_y(phi, theta)` of the steering vector.
pub fn steering_y(cfg: &UpaConfig, radio: &RadioConfig, phi: f64, theta: f64) -> CVec {
    let k = 2.0 * PI * cfg.d_y * theta.sin() * phi.cos() / radio.wavelength();
    CVec::from_fn(cfg.n_y, |q, _| C64::from_polar(1.0, k * q as f64))
}

/// 2D steering vector; element `p * n_y + q` carries
/// `exp(j 2 pi (p d_z sin(phi) + q d_y sin(theta) cos(phi)) / lambda)`.
pub fn steering_vector(cfg: &UpaConfig, radio: &RadioConfig, phi: f64, theta: f64) -> CVec {
    let lambda = radio.wavelength();
    let kz = 2.0 * PI * cfg.d_z * phi.sin() / lambda;
    let ky = 2.0 * PI * cfg.d_y * theta.sin() * phi.cos() / lambda;
    let n_y = cfg.n_y;
    CVec::from_fn(cfg.n_elements(), |idx, _| {
        let p = (idx / n_y) as f64;
        let q = (idx % n_y) as f64;
        C64::from_polar(1.0, kz * p + ky * q)
    })
}

/// SSB resource grid: occupancy mask and known unit-modulus payload.
#[derive(Debug, Clone, PartialEq)]
pub struct SsbGrid {
    /// `omega[(n, m)]` is true when subcarrier `n`, symbol `m` carries a symbol.
    pub omega: DMatrix<bool>,
    /// Payload symbols; zero off the mask.
    pub payload: CMat,
}

impl SsbGrid {
    pub fn n_sc(&self) -> usize {
        self.payload.nrows()
    }

    pub fn n_sym(&self) -> usize {
        self.payload.ncols()
    }

    pub fn occupied_count(&self) -> usize {
        self.omega.iter().filter(|&&o| o).count()
    }

    pub fn is_occupied(&self, n: usize, m: usize) -> bool {
        self.omega[(n, m)]
    }
}

/// Occupancy mask of one SSB: symbols 0 and 2 carry the 127 centred
/// subcarriers (symbol 2 adds two 48-subcarrier flanks), symbols 1 and 3 are
/// fully occupied.
pub fn ssb_occupancy() -> DMatrix<bool> {
    let centre = (SSB_SUBCARRIERS - 127) / 2..(SSB_SUBCARRIERS - 127) / 2 + 127;
    DMatrix::from_fn(SSB_SUBCARRIERS, SSB_SYMBOLS, |n, m| match m {
        0 => centre.contains(&n),
        2 => centre.contains(&n) || n < 48 || n >= SSB_SUBCARRIERS - 48,
        _ => true,
    })
}

/// Builds the SSB grid with a seed-deterministic QPSK payload on the occupied
/// cells.
pub fn build_ssb_grid(seed: u64) -> SsbGrid {
    let omega = ssb_occupancy();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut payload = CMat::zeros(SSB_SUBCARRIERS, SSB_SYMBOLS);
    // column-major walk: symbol by symbol, subcarrier fastest
    for m in 0..SSB_SYMBOLS {
        for n in 0..SSB_SUBCARRIERS {
            if omega[(n, m)] {
                let k: u32 = rng.random_range(0..4);
                payload[(n, m)] = C64::from_polar(1.0, PI / 4.0 + k as f64 * PI / 2.0);
            }
        }
    }
    SsbGrid { omega, payload }
}

/// One SSB beam: centre direction and the angular cell it covers (rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsbBeam {
    pub elevation: f64,
    pub azimuth: f64,
    pub el_width: f64,
    pub az_width: f64,
}

impl SsbBeam {
    pub fn boresight() -> Self {
        Self { elevation: 0.0, azimuth: 0.0, el_width: 0.0, az_width: 0.0 }
    }

    /// True when `(phi, theta)` lies inside the beam's grid cell.
    pub fn contains(&self, phi: f64, theta: f64) -> bool {
        (phi - self.elevation).abs() <= self.el_width / 2.0 + 1e-12
            && (theta - self.azimuth).abs() <= self.az_width / 2.0 + 1e-12
    }
}

/// SS-burst sweep: ordered beams tiling the coverage region.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub beams: Vec<SsbBeam>,
    pub burst_period: f64,
    /// (azimuth count, elevation count)
    pub grid_shape: (usize, usize),
    /// Azimuth coverage (rad).
    pub az_range: (f64, f64),
    /// Elevation coverage (rad).
    pub el_range: (f64, f64),
}

/// Tiles `az_range x el_range` (radians) into a uniform grid of beams ordered
/// row-major with azimuth fastest.
pub fn build_sweep_plan(
    az_range: (f64, f64),
    el_range: (f64, f64),
    grid_shape: (usize, usize),
    burst_period: f64,
) -> Result<SweepPlan> {
    let (n_az, n_el) = grid_shape;
    let requested = n_az * n_el;
    if requested > MAX_SSB_BEAMS {
        return Err(Error::BeamBudget { requested, max: MAX_SSB_BEAMS });
    }
    if requested == 0 {
        return Err(Error::InvalidConfig("sweep grid must contain at least one beam".into()));
    }
    if az_range.1 < az_range.0 || el_range.1 < el_range.0 {
        return Err(Error::InvalidConfig("coverage ranges must be ordered".into()));
    }
    if !(burst_period > 0.0) {
        return Err(Error::InvalidConfig("burst period must be positive".into()));
    }
    let az_width = (az_range.1 - az_range.0) / n_az as f64;
    let el_width = (el_range.1 - el_range.0) / n_el as f64;
    let mut beams = Vec::with_capacity(requested);
    for e in 0..n_el {
        for a in 0..n_az {
            beams.push(SsbBeam {
                elevation: el_range.0 + (e as f64 + 0.5) * el_width,
                azimuth: az_range.0 + (a as f64 + 0.5) * az_width,
                el_width,
                az_width,
            });
        }
    }
    Ok(SweepPlan { beams, burst_period, grid_shape, az_range, el_range })
}

/// Widened SSB transmit beamformer.
#[derive(Debug, Clone)]
pub struct SsbTxBeamformer {
    /// N x N_rf, entries of modulus `1/sqrt(N)`.
    pub analog: CMat,
    /// N_rf combining vector.
    pub digital: CVec,
}

impl SsbTxBeamformer {
    /// Effective unit-norm transmit vector `analog * digital`.
    pub fn weights(&self) -> CVec {
        &self.analog * &self.digital
    }
}

/// Sector beam for one SSB: the analog columns steer to `n_rf_z x n_rf_y`
/// sub-directions at the midpoints of a uniform partition of the beam's cell;
/// the digital vector combines them with equal magnitude and phases that add
/// coherently at the cell centre, then the product is normalised.
pub fn ssb_tx_beamformer(cfg: &UpaConfig, radio: &RadioConfig, beam: &SsbBeam) -> SsbTxBeamformer {
    let n = cfg.n_elements();
    let scale = 1.0 / (n as f64).sqrt();
    let mut analog = CMat::zeros(n, cfg.n_rf());
    for p in 0..cfg.n_rf_z {
        for q in 0..cfg.n_rf_y {
            let phi = beam.elevation + ((p as f64 + 0.5) / cfg.n_rf_z as f64 - 0.5) * beam.el_width;
            let theta = beam.azimuth + ((q as f64 + 0.5) / cfg.n_rf_y as f64 - 0.5) * beam.az_width;
            let col = steering_vector(cfg, radio, phi, theta).scale(scale);
            analog.set_column(p * cfg.n_rf_y + q, &col);
        }
    }
    let centre = steering_vector(cfg, radio, beam.elevation, beam.azimuth);
    let response = analog.adjoint() * &centre;
    let mut digital = CVec::from_fn(cfg.n_rf(), |i, _| {
        let r = response[i];
        // co-phase each column at the centre; a^H F d gains conj(r_i) d_i
        if r.norm() > 0.0 {
            r / r.norm()
        } else {
            C64::new(1.0, 0.0)
        }
    });
    let norm = (&analog * &digital).norm();
    digital.unscale_mut(norm);
    SsbTxBeamformer { analog, digital }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radio() -> RadioConfig {
        RadioConfig::fr2_default()
    }

    #[test]
    fn radio_validation() {
        assert!(RadioConfig::new(28e9, 120e3, 1.0 / 120e3).is_ok());
        assert!(RadioConfig::new(28e9, 120e3, 1.0 / 240e3).is_err());
        assert!(RadioConfig::new(-1.0, 120e3, 8.9e-6).is_err());
        let r = radio();
        assert_eq!(r.wavelength(), r.speed_of_light / r.carrier_hz);
    }

    #[test]
    fn upa_rejects_excess_rf_chains() {
        assert!(UpaConfig::half_wavelength(4, 2, 5, 1, &radio()).is_err());
        assert!(UpaConfig::half_wavelength(4, 2, 4, 2, &radio()).is_ok());
    }

    #[test]
    fn boresight_steering_is_all_ones() {
        let cfg = UpaConfig::half_wavelength(8, 4, 4, 2, &radio()).unwrap();
        let a = steering_vector(&cfg, &radio(), 0.0, 0.0);
        assert!(a.iter().all(|c| (c - C64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn two_element_azimuth_30_degrees() {
        let cfg = UpaConfig::half_wavelength(2, 1, 1, 1, &radio()).unwrap();
        let a = steering_vector(&cfg, &radio(), 0.0, 30f64.to_radians());
        // pi * sin(30 deg) = pi / 2
        assert!((a[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((a[1] - C64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn azimuth_negation_conjugates_single_row() {
        let cfg = UpaConfig::half_wavelength(8, 1, 2, 1, &radio()).unwrap();
        let phi = 0.3;
        let a = steering_vector(&cfg, &radio(), phi, 0.4);
        let b = steering_vector(&cfg, &radio(), phi, -0.4);
        assert!((a.conjugate() - b).norm() < 1e-12);
    }

    #[test]
    fn ssb_grid_layout() {
        let g = build_ssb_grid(11);
        assert_eq!((g.n_sc(), g.n_sym()), (240, 4));
        assert_eq!(g.occupied_count(), 830);
        let per_symbol: Vec<usize> = (0..4).map(|m| (0..240).filter(|&n| g.is_occupied(n, m)).count()).collect();
        assert_eq!(per_symbol, vec![127, 240, 223, 240]);
        for n in 0..240 {
            for m in 0..4 {
                let v = g.payload[(n, m)];
                if g.is_occupied(n, m) {
                    assert!((v.norm() - 1.0).abs() < 1e-12);
                } else {
                    assert_eq!(v, C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn ssb_grid_is_deterministic_in_seed() {
        assert_eq!(build_ssb_grid(5), build_ssb_grid(5));
        assert_ne!(build_ssb_grid(5).payload, build_ssb_grid(6).payload);
    }

    #[test]
    fn sweep_plan_matches_fr2_grid() {
        let plan = build_sweep_plan(
            (-60f64.to_radians(), 60f64.to_radians()),
            (0.0, 45f64.to_radians()),
            (16, 4),
            0.02,
        )
        .unwrap();
        assert_eq!(plan.beams.len(), 64);
        assert!((plan.beams[0].azimuth.to_degrees() + 56.25).abs() < 1e-9);
        assert!((plan.beams[0].elevation.to_degrees() - 5.625).abs() < 1e-9);
        // azimuth runs fastest
        assert!((plan.beams[1].azimuth.to_degrees() + 48.75).abs() < 1e-9);
        assert!((plan.beams[16].elevation.to_degrees() - 16.875).abs() < 1e-9);
    }

    #[test]
    fn sweep_plan_single_boresight_and_budget() {
        let plan = build_sweep_plan((0.0, 0.0), (0.0, 0.0), (1, 1), 0.02).unwrap();
        assert_eq!(plan.beams.len(), 1);
        assert_eq!(plan.beams[0].azimuth, 0.0);
        assert_eq!(plan.beams[0].elevation, 0.0);
        assert!(matches!(
            build_sweep_plan((-1.0, 1.0), (0.0, 1.0), (17, 4), 0.02),
            Err(Error::BeamBudget { requested: 68, .. })
        ));
    }

    #[test]
    fn tx_beamformer_boresight_gain() {
        let cfg = UpaConfig::half_wavelength(8, 4, 4, 2, &radio()).unwrap();
        let bf = ssb_tx_beamformer(&cfg, &radio(), &SsbBeam::boresight());
        let w = bf.weights();
        assert!((w.norm() - 1.0).abs() < 1e-12);
        let a = steering_vector(&cfg, &radio(), 0.0, 0.0);
        let gain = a.dotc(&w).norm();
        assert!((gain - (32f64).sqrt()).abs() < 1e-9);
        let m = 1.0 / (32f64).sqrt();
        assert!(bf.analog.iter().all(|c| (c.norm() - m).abs() < 1e-12));
    }

    #[test]
    fn tx_beam_centre_dominates_outside_cell() {
        let r = radio();
        let cfg = UpaConfig::half_wavelength(8, 4, 4, 2, &r).unwrap();
        let plan = build_sweep_plan((-60f64.to_radians(), 60f64.to_radians()), (0.0, 45f64.to_radians()), (16, 4), 0.02)
            .unwrap();
        let beam = plan.beams[21];
        let w = ssb_tx_beamformer(&cfg, &r, &beam).weights();
        let centre_gain = steering_vector(&cfg, &r, beam.elevation, beam.azimuth).dotc(&w).norm();
        let mut checked = 0;
        for i in 0..10 {
            for j in 0..10 {
                let phi = (-10.0 + 6.0 * i as f64).to_radians();
                let theta = (-80.0 + 17.0 * j as f64).to_radians();
                if beam.contains(phi, theta) {
                    continue;
                }
                checked += 1;
                let g = steering_vector(&cfg, &r, phi, theta).dotc(&w).norm();
                assert!(centre_gain >= g - 1e-12, "outside gain {g} exceeds centre {centre_gain}");
            }
        }
        assert!(checked > 90);
    }
}
