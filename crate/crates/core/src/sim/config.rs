//! Scenario files (TOML) and their resolution into ready-to-run components.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beamforming::DesignOptions;
use crate::radio::{build_sweep_plan, RadioConfig, SweepPlan, UpaConfig};
use crate::sensing::{SensingConfig, SensingSetup};
use crate::tracker::{MeasurementNoise, TrackerConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSection {
    pub carrier_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub symbol_duration_s: f64,
}

impl Default for RadioSection {
    fn default() -> Self {
        Self { carrier_hz: 28e9, subcarrier_spacing_hz: 120e3, symbol_duration_s: 8.9e-6 }
    }
}

/// Same geometry for the transmit and receive arrays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub n_y: usize,
    pub n_z: usize,
    pub n_rf_y: usize,
    pub n_rf_z: usize,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self { n_y: 8, n_z: 4, n_rf_y: 4, n_rf_z: 2 }
    }
}

/// SS-burst coverage (degrees) and beam grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsbSection {
    pub az_min_deg: f64,
    pub az_max_deg: f64,
    pub el_min_deg: f64,
    pub el_max_deg: f64,
    pub n_az: usize,
    pub n_el: usize,
}

impl Default for SsbSection {
    fn default() -> Self {
        Self { az_min_deg: -60.0, az_max_deg: 60.0, el_min_deg: 0.0, el_max_deg: 45.0, n_az: 16, n_el: 4 }
    }
}

/// Tracker settings; measurement noise defaults to the sensing resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerSection {
    pub sigma_a: f64,
    pub window: usize,
    pub gate: f64,
    pub max_missed: usize,
    pub init_sigma_velocity: f64,
    pub meas_noise: Option<MeasurementNoise>,
}

impl Default for TrackerSection {
    fn default() -> Self {
        let d = TrackerConfig::default();
        Self {
            sigma_a: d.sigma_a,
            window: d.window,
            gate: d.gate,
            max_missed: d.max_missed,
            init_sigma_velocity: d.init_sigma_velocity,
            meas_noise: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamformingSection {
    pub p_max_dbm: f64,
    /// Receiver noise of every user.
    pub noise_dbm: f64,
    /// Average-SINR floor, stored in dB and converted when used.
    pub gamma_db: f64,
    pub eps: f64,
    pub max_sca_iters: usize,
    pub n_draws: usize,
    pub hybrid_iters: usize,
}

impl Default for BeamformingSection {
    fn default() -> Self {
        let d = DesignOptions::default();
        Self {
            p_max_dbm: 10.0,
            noise_dbm: -87.0,
            gamma_db: 0.0,
            eps: d.eps,
            max_sca_iters: d.max_sca_iters,
            n_draws: d.n_draws,
            hybrid_iters: d.hybrid_iters,
        }
    }
}

impl BeamformingSection {
    pub fn p_max(&self) -> f64 {
        dbm_to_watt(self.p_max_dbm)
    }

    pub fn noise_var(&self) -> f64 {
        dbm_to_watt(self.noise_dbm)
    }

    pub fn gamma(&self) -> f64 {
        10f64.powf(self.gamma_db / 10.0)
    }

    pub fn design_options(&self, robust: bool, seed: u64) -> DesignOptions {
        DesignOptions {
            robust,
            eps: self.eps,
            max_sca_iters: self.max_sca_iters,
            n_draws: self.n_draws,
            hybrid_iters: self.hybrid_iters,
            seed,
        }
    }
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1e3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingSection {
    pub horizon_s: f64,
    /// SS-burst period `T`.
    pub ssb_period_s: f64,
    /// Prediction / beam update period.
    pub kf_period_s: f64,
}

impl Default for TimingSection {
    fn default() -> Self {
        Self { horizon_s: 4.0, ssb_period_s: 0.04, kf_period_s: 0.005 }
    }
}

/// Feedback-based beam management.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub refine_interval_s: f64,
    pub refine_beams: usize,
    pub dense_interval_s: f64,
    pub dense_beams: usize,
    /// Oversampling of the narrow DFT codebook per array axis.
    pub oversampling: usize,
    /// Symbols each user spends reporting its beam choice after every SS
    /// burst and every refinement round.
    pub feedback_symbols: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self { refine_interval_s: 0.01, refine_beams: 4, dense_interval_s: 0.005, dense_beams: 64, oversampling: 4, feedback_symbols: 0 }
    }
}

/// Constant acceleration over `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Maneuver {
    pub t_start: f64,
    pub t_end: f64,
    pub acceleration: [f64; 3],
}

/// Initial kinematics, either Cartesian (`position`, `velocity`) or
/// spherical (`range`, `elevation_deg`, `azimuth_deg`, purely radial
/// `radial_velocity`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavSpec {
    #[serde(default)]
    pub position: Option<[f64; 3]>,
    #[serde(default)]
    pub velocity: Option<[f64; 3]>,
    #[serde(default)]
    pub range: Option<f64>,
    #[serde(default)]
    pub elevation_deg: Option<f64>,
    #[serde(default)]
    pub azimuth_deg: Option<f64>,
    #[serde(default)]
    pub radial_velocity: Option<f64>,
    #[serde(default = "unit_rcs")]
    pub rcs: f64,
    #[serde(default)]
    pub maneuvers: Vec<Maneuver>,
}

fn unit_rcs() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    VelocityFactor,
    SsbPeriod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub axis: SweepAxis,
    /// Velocity factors, or SSB periods in seconds.
    pub values: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_trials() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    /// Scales every UAV's initial velocity and maneuver accelerations.
    #[serde(default = "unit_factor")]
    pub velocity_factor: f64,
    #[serde(default)]
    pub radio: RadioSection,
    #[serde(default)]
    pub array: ArraySection,
    #[serde(default)]
    pub ssb: SsbSection,
    #[serde(default)]
    pub sensing: SensingConfig,
    #[serde(default)]
    pub tracker: TrackerSection,
    #[serde(default)]
    pub beamforming: BeamformingSection,
    #[serde(default)]
    pub timing: TimingSection,
    #[serde(default)]
    pub baseline: BaselineSection,
    #[serde(default)]
    pub uav: Vec<UavSpec>,
    #[serde(default)]
    pub experiment: Option<ExperimentSection>,
}

fn unit_factor() -> f64 {
    1.0
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.timing;
        if !(t.kf_period_s > 0.0) || !(t.ssb_period_s > 0.0) || !(t.horizon_s >= t.ssb_period_s) {
            return Err(Error::InvalidConfig("need positive periods and a horizon of at least one SSB period".into()));
        }
        let ratio = t.ssb_period_s / t.kf_period_s;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(Error::InvalidConfig("SSB period must be a whole multiple of the prediction period".into()));
        }
        let b = &self.baseline;
        for interval in [b.refine_interval_s, b.dense_interval_s] {
            let r = interval / t.kf_period_s;
            if !(interval > 0.0) || (r - r.round()).abs() > 1e-9 * r.max(1.0) || r.round() < 1.0 {
                return Err(Error::InvalidConfig("refinement intervals must be whole multiples of the prediction period".into()));
            }
        }
        if b.oversampling == 0 || b.refine_beams == 0 || b.dense_beams == 0 {
            return Err(Error::InvalidConfig("baseline codebook settings must be positive".into()));
        }
        if !(self.velocity_factor >= 0.0) {
            return Err(Error::InvalidConfig("velocity factor must be non-negative".into()));
        }
        for u in &self.uav {
            let cartesian = u.position.is_some();
            let spherical = u.range.is_some() && u.elevation_deg.is_some() && u.azimuth_deg.is_some();
            if cartesian == spherical {
                return Err(Error::InvalidConfig("each UAV needs either a position or range/elevation/azimuth".into()));
            }
            if !(u.rcs > 0.0) {
                return Err(Error::InvalidConfig("RCS must be positive".into()));
            }
            for m in &u.maneuvers {
                if !(m.t_start >= 0.0 && m.t_end >= m.t_start && m.t_end <= t.horizon_s + 1e-12) {
                    return Err(Error::InvalidConfig(format!("maneuver [{}, {}] outside the horizon", m.t_start, m.t_end)));
                }
            }
        }
        if let Some(e) = &self.experiment {
            if e.values.is_empty() || e.trials == 0 {
                return Err(Error::InvalidConfig("experiment needs values and at least one trial".into()));
            }
        }
        Ok(())
    }
}

/// A scenario with every component built and checked.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub radio: RadioConfig,
    pub array: UpaConfig,
    pub plan: SweepPlan,
    pub sensing: SensingSetup,
    pub tracker: TrackerConfig,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let r = &config.radio;
        let radio = RadioConfig::new(r.carrier_hz, r.subcarrier_spacing_hz, r.symbol_duration_s)?;
        let a = &config.array;
        let array = UpaConfig::half_wavelength(a.n_y, a.n_z, a.n_rf_y, a.n_rf_z, &radio)?;
        let s = &config.ssb;
        let az = (s.az_min_deg.to_radians(), s.az_max_deg.to_radians());
        let el = (s.el_min_deg.to_radians(), s.el_max_deg.to_radians());
        let plan = build_sweep_plan(az, el, (s.n_az, s.n_el), config.timing.ssb_period_s)?;
        let sensing = SensingSetup::new(radio, array, array, config.sensing, el, az)?;
        let axes = sensing.axes();
        let t = &config.tracker;
        let tracker = TrackerConfig {
            sigma_a: t.sigma_a,
            meas_noise: t.meas_noise.unwrap_or_else(|| MeasurementNoise::from_resolution(axes.range_bin, axes.velocity_bin)),
            window: t.window,
            gate: t.gate,
            max_missed: t.max_missed,
            init_sigma_velocity: t.init_sigma_velocity,
        };
        tracker.validate()?;
        Ok(Self { config, radio, array, plan, sensing, tracker })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(ScenarioConfig::load(path)?)
    }

    /// Duration of one SS burst: every beam occupies the SSB's symbols.
    pub fn burst_duration(&self) -> f64 {
        (self.plan.beams.len() * crate::radio::SSB_SYMBOLS) as f64 * self.radio.symbol_duration_s
    }
}
