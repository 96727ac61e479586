//! Piecewise constant-acceleration UAV kinematics.

use nalgebra::Vector3;

use crate::channel::UavTruth;
use crate::sim::config::{ScenarioConfig, UavSpec};

/// Initial position and velocity of one UAV, before velocity scaling.
pub fn initial_state(u: &UavSpec) -> (Vector3<f64>, Vector3<f64>) {
    if let Some(p) = u.position {
        let v = u.velocity.unwrap_or([0.0; 3]);
        return (Vector3::from(p), Vector3::from(v));
    }
    let (el, az) = (u.elevation_deg.unwrap_or(0.0).to_radians(), u.azimuth_deg.unwrap_or(0.0).to_radians());
    let dir = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
    let v = match u.velocity {
        Some(v) => Vector3::from(v),
        None => dir * u.radial_velocity.unwrap_or(0.0),
    };
    (dir * u.range.unwrap_or(0.0), v)
}

/// Closed-form state of one UAV at time `t` with velocities and
/// accelerations scaled by `factor`.
pub fn uav_at(u: &UavSpec, factor: f64, t: f64) -> UavTruth {
    let (p0, v0) = initial_state(u);
    let mut position = p0 + v0 * (factor * t);
    let mut velocity = v0 * factor;
    for m in &u.maneuvers {
        let a = Vector3::from(m.acceleration) * factor;
        let inside = (t - m.t_start).clamp(0.0, m.t_end - m.t_start);
        let after = (t - m.t_end).max(0.0);
        velocity += a * inside;
        position += a * (0.5 * inside * inside + inside * after);
    }
    UavTruth { position, velocity, rcs: u.rcs }
}

/// Every UAV of the scenario at time `t`.
pub fn propagate_truth(cfg: &ScenarioConfig, t: f64) -> Vec<UavTruth> {
    cfg.uav.iter().map(|u| uav_at(u, cfg.velocity_factor, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::Maneuver;
    use approx::assert_relative_eq;

    fn maneuvering() -> UavSpec {
        UavSpec {
            position: Some([30.0, 30.0, 5.0]),
            velocity: Some([-8.0, -15.0, 5.0]),
            range: None,
            elevation_deg: None,
            azimuth_deg: None,
            radial_velocity: None,
            rcs: 1.0,
            maneuvers: vec![Maneuver { t_start: 1.0, t_end: 2.0, acceleration: [8.0, 8.0, -2.0] }],
        }
    }

    #[test]
    fn constant_velocity_leg() {
        let u = uav_at(&maneuvering(), 1.0, 1.0);
        assert_relative_eq!(u.position, Vector3::new(22.0, 15.0, 10.0), epsilon = 1e-12);
    }

    #[test]
    fn quadratic_term_inside_segment() {
        let u = uav_at(&maneuvering(), 1.0, 1.5);
        // (22,15,10) + v0 * 0.5 + a * 0.125
        assert_relative_eq!(u.position, Vector3::new(19.0, 8.5, 12.25), epsilon = 1e-12);
        assert_relative_eq!(u.velocity, Vector3::new(-4.0, -11.0, 4.0), epsilon = 1e-12);
    }

    #[test]
    fn velocity_continuous_at_boundaries() {
        let spec = maneuvering();
        for t in [1.0, 2.0] {
            let a = uav_at(&spec, 1.0, t - 1e-9).velocity;
            let b = uav_at(&spec, 1.0, t + 1e-9).velocity;
            assert!((a - b).norm() < 1e-7);
        }
        assert_relative_eq!(uav_at(&spec, 1.0, 3.0).velocity, Vector3::new(0.0, -7.0, 3.0), epsilon = 1e-12);
    }

    #[test]
    fn factor_scales_motion() {
        let u = uav_at(&maneuvering(), 2.0, 1.0);
        assert_relative_eq!(u.position, Vector3::new(14.0, 0.0, 15.0), epsilon = 1e-12);
    }

    #[test]
    fn spherical_spec() {
        let spec = UavSpec {
            position: None,
            velocity: None,
            range: Some(100.0),
            elevation_deg: Some(10.0),
            azimuth_deg: Some(-50.0),
            radial_velocity: Some(10.0),
            rcs: 1.0,
            maneuvers: vec![],
        };
        let u = uav_at(&spec, 1.0, 0.0);
        assert_relative_eq!(u.range(), 100.0, epsilon = 1e-9);
        assert_relative_eq!(u.elevation(), 10f64.to_radians(), epsilon = 1e-12);
        assert_relative_eq!(u.azimuth(), (-50f64).to_radians(), epsilon = 1e-12);
        assert_relative_eq!(u.radial_velocity(), 10.0, epsilon = 1e-9);
    }
}
