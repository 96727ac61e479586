//! Ground-truth channel synthesis: LoS communication channels, the monostatic
//! SSB echo seen through the hybrid receive front end, and noise.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::Rng;

use crate::linalg::complex_gaussian_scalar;
use crate::radio::{steering_vector, RadioConfig, SsbGrid, UpaConfig};
use crate::{CMat, CVec, Error, Result, C64};

/// Kinematic truth of one UAV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavTruth {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Radar cross-section (m^2).
    pub rcs: f64,
}

impl UavTruth {
    pub fn range(&self) -> f64 {
        self.position.norm()
    }

    pub fn radial_velocity(&self) -> f64 {
        self.position.dot(&self.velocity) / self.position.norm()
    }

    pub fn elevation(&self) -> f64 {
        (self.position.z / self.position.norm()).asin()
    }

    pub fn azimuth(&self) -> f64 {
        self.position.y.atan2(self.position.x)
    }
}

/// Per-target parameters of the monostatic sensing channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingTargetParams {
    /// Two-way complex gain.
    pub alpha: C64,
    /// Round-trip delay (s).
    pub tau: f64,
    /// Doppler shift (Hz).
    pub doppler: f64,
    pub phi: f64,
    pub theta: f64,
    pub range: f64,
    pub radial_velocity: f64,
}

/// Radar-equation amplitude `sqrt(c0^2 sigma / ((4 pi)^3 r^4 f_c^2))`.
pub fn radar_amplitude(range: f64, rcs: f64, radio: &RadioConfig) -> f64 {
    let c0 = radio.speed_of_light;
    (c0 * c0 * rcs / ((4.0 * PI).powi(3) * range.powi(4) * radio.carrier_hz * radio.carrier_hz)).sqrt()
}

/// Maps a UAV truth to echo parameters; the reflection phase is drawn
/// uniformly from `rng`.
pub fn truth_to_params<R: Rng + ?Sized>(u: &UavTruth, radio: &RadioConfig, rng: &mut R) -> Result<SensingTargetParams> {
    let r = u.range();
    if !(r > 0.0) {
        return Err(Error::OutOfFieldOfView("target at the array origin".into()));
    }
    if !(u.rcs > 0.0) {
        return Err(Error::InvalidConfig("radar cross-section must be positive".into()));
    }
    let phi = u.elevation();
    if phi.abs() >= PI / 2.0 - 1e-12 {
        return Err(Error::OutOfFieldOfView(format!("elevation {phi} rad on the array axis")));
    }
    let v = u.radial_velocity();
    let c0 = radio.speed_of_light;
    let phase = rng.random_range(0.0..2.0 * PI);
    Ok(SensingTargetParams {
        alpha: C64::from_polar(radar_amplitude(r, u.rcs, radio), phase),
        tau: 2.0 * r / c0,
        doppler: 2.0 * v * radio.carrier_hz / c0,
        phi,
        theta: u.azimuth(),
        range: r,
        radial_velocity: v,
    })
}

/// Received SSB echo after the receive analog combiner: one
/// `n_sc x n_sym` grid per RF chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedGrid {
    pub chains: Vec<CMat>,
}

impl ReceivedGrid {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn energy(&self) -> f64 {
        self.chains.iter().map(|c| c.norm_squared()).sum()
    }
}

/// Noiseless effective sensing channel `h_rad[n, m]` per RF chain, i.e. the
/// echo before multiplication by the payload.
pub fn effective_sensing_channel(
    targets: &[SensingTargetParams],
    n_sc: usize,
    n_sym: usize,
    w_tx: &CVec,
    w_rx: &CMat,
    tx_cfg: &UpaConfig,
    rx_cfg: &UpaConfig,
    radio: &RadioConfig,
) -> Vec<CMat> {
    let n_rf = w_rx.ncols();
    let mut out = vec![CMat::zeros(n_sc, n_sym); n_rf];
    for t in targets {
        let a_tx = steering_vector(tx_cfg, radio, t.phi, t.theta);
        let a_rx = steering_vector(rx_cfg, radio, t.phi, t.theta);
        let tx_gain = a_tx.dotc(w_tx);
        let rx_resp = w_rx.adjoint() * &a_rx;
        let delay_step = -2.0 * PI * radio.subcarrier_spacing_hz * t.tau;
        let doppler_step = 2.0 * PI * radio.symbol_duration_s * t.doppler;
        for m in 0..n_sym {
            let dop = C64::from_polar(1.0, doppler_step * m as f64);
            for n in 0..n_sc {
                let ph = t.alpha * C64::from_polar(1.0, delay_step * n as f64) * dop * tx_gain;
                for (p, grid) in out.iter_mut().enumerate() {
                    grid[(n, m)] += ph * rx_resp[p];
                }
            }
        }
    }
    out
}

/// Echo of one SSB through transmit vector `w_tx` and receive analog combiner
/// `w_rx` (N_rx x N_rx_rf), with white beamspace noise of `noise_power` per
/// cell on every resource element.
#[allow(clippy::too_many_arguments)]
pub fn sensing_echo<R: Rng + ?Sized>(
    targets: &[SensingTargetParams],
    grid: &SsbGrid,
    w_tx: &CVec,
    w_rx: &CMat,
    tx_cfg: &UpaConfig,
    rx_cfg: &UpaConfig,
    radio: &RadioConfig,
    noise_power: f64,
    rng: &mut R,
) -> ReceivedGrid {
    let (n_sc, n_sym) = (grid.n_sc(), grid.n_sym());
    let mut chains = effective_sensing_channel(targets, n_sc, n_sym, w_tx, w_rx, tx_cfg, rx_cfg, radio);
    for chain in chains.iter_mut() {
        for m in 0..n_sym {
            for n in 0..n_sc {
                chain[(n, m)] = if grid.is_occupied(n, m) { chain[(n, m)] * grid.payload[(n, m)] } else { C64::new(0.0, 0.0) };
            }
        }
    }
    if noise_power > 0.0 {
        for chain in chains.iter_mut() {
            for m in 0..n_sym {
                for n in 0..n_sc {
                    chain[(n, m)] += complex_gaussian_scalar(rng, noise_power);
                }
            }
        }
    }
    ReceivedGrid { chains }
}

/// Single-path LoS downlink channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CommChannel {
    pub h: CVec,
    pub alpha: C64,
    pub phi: f64,
    pub theta: f64,
}

/// `lambda / (4 pi r)` free-space amplitude with a uniform random phase.
pub fn comm_channel<R: Rng + ?Sized>(u: &UavTruth, cfg: &UpaConfig, radio: &RadioConfig, rng: &mut R) -> Result<CommChannel> {
    let r = u.range();
    if !(r > 0.0) {
        return Err(Error::OutOfFieldOfView("user at the array origin".into()));
    }
    let phase = rng.random_range(0.0..2.0 * PI);
    let alpha = C64::from_polar(radio.wavelength() / (4.0 * PI * r), phase);
    let (phi, theta) = (u.elevation(), u.azimuth());
    let h = steering_vector(cfg, radio, phi, theta) * alpha;
    Ok(CommChannel { h, alpha, phi, theta })
}

/// Instantaneous SINR of every user on the true channels; column `k` of `w`
/// serves user `k`.
pub fn comm_receive_snr(channels: &[CommChannel], w: &CMat, noise_var: f64) -> Vec<f64> {
    // independent unit-power streams: interference adds in power
    channels
        .iter()
        .enumerate()
        .map(|(k, ch)| {
            let gains: Vec<f64> = w.column_iter().map(|wj| ch.h.dotc(&wj).norm_sqr()).collect();
            let interference: f64 = gains.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, g)| g).sum();
            gains[k] / (interference + noise_var)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::{build_ssb_grid, UpaConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn truth(p: [f64; 3], v: [f64; 3]) -> UavTruth {
        UavTruth { position: Vector3::from(p), velocity: Vector3::from(v), rcs: 1.0 }
    }

    #[test]
    fn axis_aligned_truth() {
        let radio = RadioConfig::fr2_default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = truth_to_params(&truth([100.0, 0.0, 0.0], [10.0, 0.0, 0.0]), &radio, &mut rng).unwrap();
        assert!((p.range - 100.0).abs() < 1e-12);
        assert!((p.radial_velocity - 10.0).abs() < 1e-12);
        assert_eq!(p.phi, 0.0);
        assert_eq!(p.theta, 0.0);
        assert!((p.tau - 200.0 / 3e8).abs() < 1e-20);
        assert!((p.doppler - 2.0 * 10.0 * 28e9 / 3e8).abs() < 1e-6);
    }

    #[test]
    fn zenith_and_origin_rejected() {
        let radio = RadioConfig::fr2_default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(truth_to_params(&truth([0.0, 0.0, 50.0], [0.0; 3]), &radio, &mut rng).is_err());
        assert!(truth_to_params(&truth([0.0, 0.0, 0.0], [0.0; 3]), &radio, &mut rng).is_err());
    }

    #[test]
    fn radar_equation_amplitude() {
        let radio = RadioConfig::fr2_default();
        // hand evaluation: (3e8)^2 / ((4 pi)^3 * 1e8 * (28e9)^2)
        let four_pi_cubed: f64 = 1984.4017075391884;
        let expected = (9e16 / (four_pi_cubed * 1e8 * 7.84e20)).sqrt();
        assert!((radar_amplitude(100.0, 1.0, &radio) - expected).abs() / expected < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = truth_to_params(&truth([100.0, 0.0, 0.0], [0.0; 3]), &radio, &mut rng).unwrap();
        assert!((p.alpha.norm() - expected).abs() / expected < 1e-12);
        // doubling the RCS doubles |alpha|^2
        let r2 = radar_amplitude(100.0, 2.0, &radio).powi(2) / expected.powi(2);
        assert!((r2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_scene_noiseless_echo_is_zero() {
        let radio = RadioConfig::fr2_default();
        let cfg = UpaConfig::half_wavelength(4, 2, 2, 1, &radio).unwrap();
        let grid = build_ssb_grid(1);
        let w_tx = CVec::from_element(8, C64::new(1.0 / 8f64.sqrt(), 0.0));
        let w_rx = CMat::from_element(8, 2, C64::new(1.0 / 8f64.sqrt(), 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rx = sensing_echo(&[], &grid, &w_tx, &w_rx, &cfg, &cfg, &radio, 0.0, &mut rng);
        assert_eq!(rx.n_chains(), 2);
        assert_eq!(rx.energy(), 0.0);
    }

    #[test]
    fn single_user_matched_filter_sinr() {
        let radio = RadioConfig::fr2_default();
        let cfg = UpaConfig::half_wavelength(4, 2, 2, 1, &radio).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ch = comm_channel(&truth([50.0, 10.0, 5.0], [0.0; 3]), &cfg, &radio, &mut rng).unwrap();
        let p: f64 = 0.5;
        let w = CMat::from_column_slice(8, 1, (ch.h.clone() * C64::new(p.sqrt() / ch.h.norm(), 0.0)).as_slice());
        let sinr = comm_receive_snr(&[ch.clone()], &w, 1e-9);
        let expected = p * ch.h.norm_squared() / 1e-9;
        assert!((sinr[0] - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn orthogonal_beam_gives_zero_sinr() {
        let radio = RadioConfig::fr2_default();
        let cfg = UpaConfig::half_wavelength(4, 1, 1, 1, &radio).unwrap();
        let ch = CommChannel {
            h: crate::radio::steering_vector(&cfg, &radio, 0.0, 0.0),
            alpha: C64::new(1.0, 0.0),
            phi: 0.0,
            theta: 0.0,
        };
        // alternating signs are orthogonal to the all-ones vector
        let w = CMat::from_column_slice(4, 1, &[C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]);
        assert_eq!(comm_receive_snr(&[ch], &w, 1.0)[0], 0.0);
    }
}
