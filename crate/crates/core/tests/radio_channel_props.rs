//! Array, SSB grid and channel invariants over random inputs.

use std::f64::consts::PI;

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssb_isac::channel::{effective_sensing_channel, sensing_echo, truth_to_params, SensingTargetParams, UavTruth};
use ssb_isac::radio::{build_ssb_grid, steering_vector, steering_y, steering_z, RadioConfig, UpaConfig};
use ssb_isac::{CVec, C64};

fn radio() -> RadioConfig {
    RadioConfig::fr2_default()
}

fn array(n_y: usize, n_z: usize) -> UpaConfig {
    UpaConfig::half_wavelength(n_y, n_z, 1, 1, &radio()).unwrap()
}

/// Element `p * n_y + q` straight from the phase formula.
fn steering_oracle(cfg: &UpaConfig, phi: f64, theta: f64) -> CVec {
    let lambda = radio().wavelength();
    CVec::from_fn(cfg.n_elements(), |i, _| {
        let (p, q) = ((i / cfg.n_y) as f64, (i % cfg.n_y) as f64);
        C64::from_polar(1.0, 2.0 * PI * (p * cfg.d_z * phi.sin() + q * cfg.d_y * theta.sin() * phi.cos()) / lambda)
    })
}

fn target(range: f64, v: f64, phi: f64, theta: f64, phase: f64) -> SensingTargetParams {
    let r = radio();
    let c0 = r.speed_of_light;
    SensingTargetParams {
        alpha: C64::from_polar(1e-6, phase),
        tau: 2.0 * range / c0,
        doppler: 2.0 * v * r.carrier_hz / c0,
        phi,
        theta,
        range,
        radial_velocity: v,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steering_matches_phase_formula(n_y in 1usize..9, n_z in 1usize..5, phi in -1.5f64..1.5, theta in -PI..PI) {
        let cfg = array(n_y, n_z);
        let a = steering_vector(&cfg, &radio(), phi, theta);
        let oracle = steering_oracle(&cfg, phi, theta);
        prop_assert!((&a - &oracle).norm() < 1e-9);
        for x in a.iter() {
            prop_assert!((x.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn steering_is_kronecker_of_axis_factors(n_y in 1usize..9, n_z in 1usize..5, phi in -1.5f64..1.5, theta in -PI..PI) {
        let cfg = array(n_y, n_z);
        let a = steering_vector(&cfg, &radio(), phi, theta);
        let az = steering_z(&cfg, &radio(), phi);
        let ay = steering_y(&cfg, &radio(), phi, theta);
        for p in 0..n_z {
            for q in 0..n_y {
                prop_assert!((a[p * n_y + q] - az[p] * ay[q]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn steering_depends_on_azimuth_through_its_sine(phi in -1.5f64..1.5, theta in -1.5f64..1.5) {
        let cfg = array(6, 3);
        let a = steering_vector(&cfg, &radio(), phi, theta);
        let b = steering_vector(&cfg, &radio(), phi, PI - theta);
        prop_assert!((&a - &b).norm() < 1e-9);
    }

    #[test]
    fn ssb_payload_energy_is_occupied_count(seed in any::<u64>()) {
        let g = build_ssb_grid(seed);
        let energy: f64 = g.payload.iter().map(|x| x.norm_sqr()).sum();
        prop_assert!((energy - g.occupied_count() as f64).abs() < 1e-9);
        for n in 0..g.n_sc() {
            for m in 0..g.n_sym() {
                if !g.is_occupied(n, m) {
                    prop_assert_eq!(g.payload[(n, m)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn noiseless_echo_is_linear_in_targets(
        r1 in 20.0f64..300.0, r2 in 20.0f64..300.0, v1 in -40.0f64..40.0, v2 in -40.0f64..40.0,
        ph1 in 0.0f64..6.28, ph2 in 0.0f64..6.28, az in -1.0f64..1.0,
    ) {
        let cfg = UpaConfig::half_wavelength(4, 2, 2, 1, &radio()).unwrap();
        let grid = build_ssb_grid(1);
        let w_tx = steering_vector(&cfg, &radio(), 0.1, az).unscale(8f64.sqrt());
        let w_rx = ssb_isac::sensing::design_rx_beamformer(
            &cfg, &radio(), &ssb_isac::radio::SsbBeam { elevation: 0.1, azimuth: az, el_width: 0.2, az_width: 0.2 },
        ).matrix;
        let a = target(r1, v1, 0.1, az, ph1);
        let b = target(r2, v2, 0.15, az + 0.05, ph2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let echo = |ts: &[SensingTargetParams], rng: &mut ChaCha8Rng| {
            sensing_echo(ts, &grid, &w_tx, &w_rx, &cfg, &cfg, &radio(), 0.0, rng)
        };
        let both = echo(&[a, b], &mut rng);
        let ea = echo(&[a], &mut rng);
        let eb = echo(&[b], &mut rng);
        for p in 0..both.n_chains() {
            let sum = &ea.chains[p] + &eb.chains[p];
            prop_assert!((&both.chains[p] - &sum).norm() <= 1e-10 * both.chains[p].norm().max(1e-300));
        }
    }

    #[test]
    fn negated_velocity_conjugates_symbol_progression(v in 1.0f64..80.0, range in 20.0f64..300.0, n in 0usize..240) {
        let cfg = UpaConfig::half_wavelength(4, 2, 1, 1, &radio()).unwrap();
        let w_tx = steering_vector(&cfg, &radio(), 0.0, 0.0).unscale(8f64.sqrt());
        let w_rx = w_tx.clone().reshape_generic(nalgebra::Dyn(8), nalgebra::Dyn(1));
        let run = |vel: f64| effective_sensing_channel(&[target(range, vel, 0.0, 0.0, 0.0)], 240, 4, &w_tx, &w_rx, &cfg, &cfg, &radio());
        let (up, down) = (run(v), run(-v));
        for m in 1..4 {
            let a = up[0][(n, m)] / up[0][(n, 0)];
            let b = down[0][(n, m)] / down[0][(n, 0)];
            prop_assert!((a - b.conj()).norm() < 1e-9);
        }
    }

    #[test]
    fn doubling_rcs_doubles_gain_and_echo_energy(range in 20.0f64..300.0, rcs in 0.01f64..10.0, seed in any::<u64>()) {
        let dir = Vector3::new(0.9, 0.3, 0.2).normalize();
        let mk = |s: f64| UavTruth { position: dir * range, velocity: Vector3::zeros(), rcs: s };
        let a = truth_to_params(&mk(rcs), &radio(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = truth_to_params(&mk(2.0 * rcs), &radio(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!((b.alpha.norm_sqr() / a.alpha.norm_sqr() - 2.0).abs() < 1e-12);
        let cfg = UpaConfig::half_wavelength(4, 2, 2, 1, &radio()).unwrap();
        let grid = build_ssb_grid(2);
        let w_tx = steering_vector(&cfg, &radio(), a.phi, a.theta).unscale(8f64.sqrt());
        let w_rx = ssb_isac::sensing::design_rx_beamformer(
            &cfg, &radio(), &ssb_isac::radio::SsbBeam { elevation: a.phi, azimuth: a.theta, el_width: 0.2, az_width: 0.2 },
        ).matrix;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ea = sensing_echo(&[a], &grid, &w_tx, &w_rx, &cfg, &cfg, &radio(), 0.0, &mut rng).energy();
        let eb = sensing_echo(&[b], &grid, &w_tx, &w_rx, &cfg, &cfg, &radio(), 0.0, &mut rng).energy();
        prop_assert!((eb / ea - 2.0).abs() < 1e-9);
    }
}
