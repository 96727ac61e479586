//! Monte-Carlo parameter sweeps.

use rayon::prelude::*;
use serde::Serialize;

use crate::sim::config::{Scenario, ScenarioConfig, SweepAxis};
use crate::sim::run::{simulate, Scheme};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: &'static str,
    pub value: f64,
    pub scheme: Scheme,
    /// Mean over trials of the time-averaged sum-rate (bit/s/Hz).
    pub mean: f64,
    /// Sample standard deviation over trials.
    pub std: f64,
    pub trials: usize,
}

pub fn axis_name(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::VelocityFactor => "velocity_factor",
        SweepAxis::SsbPeriod => "ssb_period_s",
    }
}

/// `base` with one sweep coordinate applied.
pub fn apply_axis(base: &ScenarioConfig, axis: SweepAxis, value: f64) -> ScenarioConfig {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::VelocityFactor => cfg.velocity_factor = value,
        SweepAxis::SsbPeriod => cfg.timing.ssb_period_s = value,
    }
    cfg
}

/// Time-averaged rate of every scheme for trials `0..trials` at every value.
/// Trial `i` uses seed `base.seed + i` for all schemes and values.
pub fn sweep_experiment(
    base: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    trials: usize,
    schemes: &[Scheme],
) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(usize, usize)> = (0..values.len()).flat_map(|v| (0..trials).map(move |t| (v, t))).collect();
    let results: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(v, trial)| -> Result<Vec<f64>> {
            let cfg = apply_axis(base, axis, values[v]);
            let horizon = cfg.timing.horizon_s;
            let seed = base.seed.wrapping_add(trial as u64);
            let scn = Scenario::new(cfg)?;
            schemes.iter().map(|&s| Ok(simulate(&scn, s, seed)?.average_rate(horizon))).collect()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (v, &value) in values.iter().enumerate() {
        for (s, &scheme) in schemes.iter().enumerate() {
            let samples: Vec<f64> = (0..trials).map(|t| results[v * trials + t][s]).collect();
            let (mean, std) = mean_std(&samples);
            rows.push(SweepRow { axis: axis_name(axis), value, scheme, mean, std, trials });
        }
    }
    Ok(rows)
}

pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_sweep_equals_single_run() {
        let text = "seed = 4\n[timing]\nhorizon_s = 0.2\nssb_period_s = 0.04\nkf_period_s = 0.005\n[[uav]]\nposition = [40.0, 10.0, 8.0]\nvelocity = [-3.0, 2.0, 0.0]\n";
        let cfg = ScenarioConfig::from_toml(text).unwrap();
        let rows = sweep_experiment(&cfg, SweepAxis::VelocityFactor, &[1.0], 1, &[Scheme::Baseline]).unwrap();
        let direct = simulate(&Scenario::new(cfg).unwrap(), Scheme::Baseline, 4).unwrap().average_rate(0.2);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean, direct);
        assert_eq!(rows[0].std, 0.0);
    }
}
