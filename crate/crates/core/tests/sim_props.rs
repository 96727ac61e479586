//! Trajectory and simulation-loop invariants.

use proptest::prelude::*;
use ssb_isac::sim::config::{Maneuver, UavSpec};
use ssb_isac::sim::trajectory::uav_at;
use ssb_isac::sim::{simulate, Scenario, ScenarioConfig, Scheme};

const MANEUVER: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/maneuver.toml");

fn short_scenario(horizon: f64) -> Scenario {
    let mut cfg = ScenarioConfig::load(std::path::Path::new(MANEUVER)).unwrap();
    cfg.timing.horizon_s = horizon;
    for u in &mut cfg.uav {
        for m in &mut u.maneuvers {
            (m.t_start, m.t_end) = (0.25 * horizon, 0.5 * horizon);
        }
    }
    Scenario::new(cfg).unwrap()
}

fn spec_strategy() -> impl Strategy<Value = UavSpec> {
    (
        prop::array::uniform3(-100.0f64..100.0),
        prop::array::uniform3(-20.0f64..20.0),
        prop::collection::vec((0.0f64..3.0, 0.05f64..1.0, prop::array::uniform3(-10.0f64..10.0)), 0..3),
    )
        .prop_map(|(p, v, ms)| UavSpec {
            position: Some(p),
            velocity: Some(v),
            range: None,
            elevation_deg: None,
            azimuth_deg: None,
            radial_velocity: None,
            rcs: 1.0,
            maneuvers: ms
                .into_iter()
                .map(|(t_start, len, acceleration)| Maneuver { t_start, t_end: t_start + len, acceleration })
                .collect(),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Position and velocity have no jumps, maneuver edges included.
    #[test]
    fn trajectories_are_continuous(u in spec_strategy(), factor in 0.5f64..2.0) {
        let mut edges: Vec<f64> = u.maneuvers.iter().flat_map(|m| [m.t_start, m.t_end]).collect();
        edges.push(1.7);
        let a_max: f64 = u.maneuvers.iter().map(|m| nalgebra::Vector3::from(m.acceleration).norm()).sum::<f64>() * factor;
        let h = 1e-7;
        for &t in &edges {
            let (before, after) = (uav_at(&u, factor, (t - h).max(0.0)), uav_at(&u, factor, t + h));
            let v_max = before.velocity.norm().max(after.velocity.norm());
            prop_assert!((after.position - before.position).norm() <= 2.0 * h * v_max + 1e-9);
            prop_assert!((after.velocity - before.velocity).norm() <= 2.0 * h * a_max + 1e-9);
        }
    }

    /// Without maneuvers the velocity factor scales displacement linearly.
    #[test]
    fn velocity_factor_scales_straight_flight(mut u in spec_strategy(), factor in 0.5f64..3.0, t in 0.0f64..4.0) {
        u.maneuvers.clear();
        let p0 = uav_at(&u, factor, 0.0).position;
        let d1 = uav_at(&u, 1.0, t).position - p0;
        let df = uav_at(&u, factor, t).position - p0;
        prop_assert!((df - d1 * factor).norm() <= 1e-9 * (1.0 + df.norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    /// Overhead plus data time fills the horizon exactly, per scheme and
    /// user, with non-negative rates on strictly increasing intervals.
    #[test]
    fn time_is_conserved(seed in any::<u64>()) {
        let scn = short_scenario(0.4);
        let horizon = scn.config.timing.horizon_s;
        for scheme in [Scheme::Proposed, Scheme::NonRobust, Scheme::Baseline, Scheme::BaselineDense] {
            let out = simulate(&scn, scheme, seed).unwrap();
            let users = scn.config.uav.len();
            for user in 0..users {
                let rows: Vec<_> = out.rates.iter().filter(|r| r.user == user && r.scheme == scheme).collect();
                let total: f64 = rows.iter().map(|r| r.duration).sum();
                prop_assert!((total - horizon).abs() <= 1e-9, "{scheme:?} user {user}: {total}");
                for pair in rows.windows(2) {
                    prop_assert!(pair[1].time > pair[0].time);
                }
                prop_assert!(rows.iter().all(|r| r.rate >= 0.0 && r.rate.is_finite()));
            }
        }
    }
}
