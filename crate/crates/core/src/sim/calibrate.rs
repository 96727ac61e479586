//! Monte-Carlo estimate of the sensing measurement noise fed to the tracker.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::channel::{truth_to_params, UavTruth};
use crate::sensing::sense_burst;
use crate::sim::config::Scenario;
use crate::tracker::MeasurementNoise;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    /// RMS errors of matched measurements.
    pub noise: MeasurementNoise,
    pub matched: usize,
    pub missed: usize,
}

/// Places one target uniformly inside a random SSB cell, at a range in
/// `range_span` and radial speed up to `max_speed`, senses it and matches
/// the nearest measurement (within 2 range bins and 5 degrees).
pub fn calibrate_meas_noise(
    scn: &Scenario,
    trials: usize,
    range_span: (f64, f64),
    max_speed: f64,
    seed: u64,
) -> Result<Calibration> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let axes = scn.sensing.axes();
    let mut sq = [0.0; 4];
    let (mut matched, mut missed) = (0usize, 0usize);
    for _ in 0..trials {
        let beam = scn.plan.beams[rng.random_range(0..scn.plan.beams.len())];
        let el = beam.elevation + (rng.random::<f64>() - 0.5) * beam.el_width;
        let az = beam.azimuth + (rng.random::<f64>() - 0.5) * beam.az_width;
        let r = rng.random_range(range_span.0..range_span.1);
        let v = rng.random_range(-max_speed..=max_speed);
        let dir = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
        let truth = UavTruth { position: dir * r, velocity: dir * v, rcs: scn.config.uav.first().map_or(1.0, |u| u.rcs) };
        let target = truth_to_params(&truth, &scn.radio, &mut rng)?;
        let report = sense_burst(&[target], &beam, &scn.sensing, &mut rng)?;
        let best = report
            .measurements
            .iter()
            .map(|m| {
                let daz = (m.azimuth - az + PI).rem_euclid(2.0 * PI) - PI;
                (m, [m.range - r, m.velocity - v, m.elevation - el, daz])
            })
            .filter(|(_, e)| e[0].abs() <= 2.0 * axes.range_bin && e[2].abs().max(e[3].abs()) <= 5f64.to_radians())
            .min_by(|a, b| a.1[0].abs().total_cmp(&b.1[0].abs()));
        match best {
            Some((_, e)) => {
                matched += 1;
                for i in 0..4 {
                    sq[i] += e[i] * e[i];
                }
            }
            None => missed += 1,
        }
    }
    let n = matched.max(1) as f64;
    let rms = |i: usize| (sq[i] / n).sqrt();
    Ok(Calibration {
        noise: MeasurementNoise { range: rms(0), velocity: rms(1), elevation: rms(2), azimuth: rms(3) },
        matched,
        missed,
    })
}
