//! Per-UAV extended Kalman filter on a nearly-constant-velocity model with
//! spherical (range, radial velocity, elevation, azimuth) measurements, and
//! an innovation-driven covariance correction for model mismatch.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Matrix4x6, Matrix6, Matrix6x4, Vector3, Vector4, Vector6};
use serde::{Deserialize, Serialize};

use crate::linalg::psd_project_real;
use crate::sensing::Measurement;
use crate::{Error, Result};

/// `[x, y, z, v_x, v_y, v_z]`
pub type State = Vector6<f64>;
pub type Covariance = Matrix6<f64>;
/// `[r, v, elevation, azimuth]`
pub type MeasVector = Vector4<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementNoise {
    pub range: f64,
    pub velocity: f64,
    pub elevation: f64,
    pub azimuth: f64,
}

impl MeasurementNoise {
    /// Quantisation-level defaults: bin widths over `sqrt(12)` and 0.5 deg.
    pub fn from_resolution(range_bin: f64, velocity_bin: f64) -> Self {
        let q = 12f64.sqrt();
        let half_deg = 0.5f64.to_radians();
        Self { range: range_bin / q, velocity: velocity_bin / q, elevation: half_deg, azimuth: half_deg }
    }

    pub fn covariance(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::new(
            self.range.powi(2),
            self.velocity.powi(2),
            self.elevation.powi(2),
            self.azimuth.powi(2),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Acceleration standard deviation (m/s^2).
    pub sigma_a: f64,
    pub meas_noise: MeasurementNoise,
    /// Innovation window length.
    pub window: usize,
    /// Chi-square gate on the innovation Mahalanobis distance.
    pub gate: f64,
    /// Tracks missing more than this many bursts in a row are dropped.
    pub max_missed: usize,
    /// Initial velocity standard deviation (m/s).
    pub init_sigma_velocity: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            sigma_a: 6.0,
            // 256-point IDFT at 120 kHz, 64-point DFT at 8.9 us, 28 GHz
            meas_noise: MeasurementNoise::from_resolution(4.8828125, 9.405096308186195),
            window: 8,
            gate: 13.28,
            max_missed: 3,
            init_sigma_velocity: 10.0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let n = &self.meas_noise;
        if !(self.sigma_a >= 0.0) || [n.range, n.velocity, n.elevation, n.azimuth].iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidConfig("tracker noise levels must be positive".into()));
        }
        if self.window == 0 || !(self.gate > 0.0) || !(self.init_sigma_velocity > 0.0) {
            return Err(Error::InvalidConfig("tracker window, gate and initial spread must be positive".into()));
        }
        Ok(())
    }
}

/// NCV transition and white-acceleration process noise for a step `t`.
pub fn transition_matrices(t: f64, sigma_a: f64) -> (Covariance, Covariance) {
    let mut f = Covariance::identity();
    let mut q = Covariance::zeros();
    let s2 = sigma_a * sigma_a;
    for i in 0..3 {
        f[(i, i + 3)] = t;
        q[(i, i)] = s2 * t.powi(3) / 3.0;
        q[(i, i + 3)] = s2 * t.powi(2) / 2.0;
        q[(i + 3, i)] = s2 * t.powi(2) / 2.0;
        q[(i + 3, i + 3)] = s2 * t;
    }
    (f, q)
}

fn check_geometry(s: &State) -> Result<(f64, f64)> {
    let r = s.fixed_rows::<3>(0).norm();
    let rho = s[0].hypot(s[1]);
    if !(r > 0.0) || !(rho > 0.0) {
        return Err(Error::Singular(format!("measurement model singular at position ({}, {}, {})", s[0], s[1], s[2])));
    }
    Ok((r, rho))
}

/// Spherical measurement of a state.
pub fn measure_fn(s: &State) -> Result<MeasVector> {
    let (r, _) = check_geometry(s)?;
    let pos = s.fixed_rows::<3>(0);
    let vel = s.fixed_rows::<3>(3);
    Ok(MeasVector::new(r, pos.dot(&vel) / r, (s[2] / r).asin(), s[1].atan2(s[0])))
}

/// Closed-form Jacobian of [`measure_fn`].
pub fn jacobian(s: &State) -> Result<Matrix4x6<f64>> {
    let (r, rho) = check_geometry(s)?;
    let (x, y, z) = (s[0], s[1], s[2]);
    let (vx, vy, vz) = (s[3], s[4], s[5]);
    let t = x * vx + y * vy + z * vz;
    let r2 = r * r;
    let r3 = r2 * r;
    let rho2 = rho * rho;
    let mut g = Matrix4x6::zeros();
    g[(0, 0)] = x / r;
    g[(0, 1)] = y / r;
    g[(0, 2)] = z / r;
    g[(1, 0)] = vx / r - t * x / r3;
    g[(1, 1)] = vy / r - t * y / r3;
    g[(1, 2)] = vz / r - t * z / r3;
    g[(1, 3)] = x / r;
    g[(1, 4)] = y / r;
    g[(1, 5)] = z / r;
    g[(2, 0)] = -x * z / (r2 * rho);
    g[(2, 1)] = -y * z / (r2 * rho);
    g[(2, 2)] = rho / r2;
    g[(3, 0)] = -y / rho2;
    g[(3, 1)] = x / rho2;
    Ok(g)
}

/// Wraps the angle components of an innovation into `(-pi, pi]`.
pub fn wrap_innovation(mut nu: MeasVector) -> MeasVector {
    for i in 2..4 {
        nu[i] = wrap_angle(nu[i]);
    }
    nu
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

fn symmetrize(p: &Covariance) -> Covariance {
    (p + p.transpose()) * 0.5
}

/// Linear Kalman correction with innovation `nu`, measurement matrix `h` and
/// noise `r`; Joseph-form covariance.
pub fn kalman_update(
    s: &State,
    p: &Covariance,
    nu: &MeasVector,
    h: &Matrix4x6<f64>,
    r: &Matrix4<f64>,
) -> Result<(State, Covariance)> {
    let innov_cov = h * p * h.transpose() + r;
    let inv = innov_cov.try_inverse().ok_or_else(|| Error::Singular("innovation covariance".into()))?;
    let k: Matrix6x4<f64> = p * h.transpose() * inv;
    let ikh = Covariance::identity() - k * h;
    let p_new = ikh * p * ikh.transpose() + k * r * k.transpose();
    Ok((s + k * nu, symmetrize(&p_new)))
}

/// Outcome of the mismatch correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub corrected: Covariance,
    pub bias: Covariance,
    /// Set when `G G^T` was singular and no correction was applied.
    pub singular: bool,
}

/// Nominal measurement-domain prediction with standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedParams {
    pub range: f64,
    pub elevation: f64,
    pub azimuth: f64,
    pub sigma_range: f64,
    pub sigma_elevation: f64,
    pub sigma_azimuth: f64,
}

/// First-order propagation of `cov` into range, elevation and azimuth.
pub fn predicted_params_from(s: &State, cov: &Covariance) -> Result<PredictedParams> {
    let m = measure_fn(s)?;
    let g = jacobian(s)?;
    let var = |row: usize| {
        let grad = g.row(row).transpose();
        (grad.transpose() * cov * grad)[(0, 0)].max(0.0)
    };
    Ok(PredictedParams {
        range: m[0],
        elevation: m[2],
        azimuth: m[3],
        sigma_range: var(0).sqrt(),
        sigma_elevation: var(2).sqrt(),
        sigma_azimuth: var(3).sqrt(),
    })
}

/// Posterior correction `P + G^+ [S_emp - S_th]_+ G^+^T` from the buffered
/// innovations, with `S_th = G P G^T + meas_cov`.
pub fn correct_covariance(
    s: &State,
    p: &Covariance,
    innovations: &VecDeque<MeasVector>,
    meas_cov: &Matrix4<f64>,
) -> Result<Correction> {
    let unchanged = |singular| Correction { corrected: *p, bias: Covariance::zeros(), singular };
    if innovations.is_empty() {
        return Ok(unchanged(false));
    }
    let g = match jacobian(s) {
        Ok(g) => g,
        Err(_) => return Ok(unchanged(true)),
    };
    let mut s_emp = Matrix4::zeros();
    for nu in innovations {
        s_emp += nu * nu.transpose();
    }
    s_emp /= innovations.len() as f64;
    let s_th = g * p * g.transpose() + meas_cov;
    let delta = psd_project_real(&nalgebra::DMatrix::from_iterator(4, 4, (s_emp - s_th).iter().cloned()));
    let delta = Matrix4::from_iterator(delta.iter().cloned());
    let Some(ggt_inv) = (g * g.transpose()).try_inverse() else {
        return Ok(unchanged(true));
    };
    let pinv: Matrix6x4<f64> = g.transpose() * ggt_inv;
    let bias = symmetrize(&(pinv * delta * pinv.transpose()));
    Ok(Correction { corrected: symmetrize(&(p + bias)), bias, singular: false })
}

/// One tracked UAV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub id: usize,
    pub state: State,
    pub cov: Covariance,
    pub cov_corrected: Covariance,
    pub bias: Covariance,
    pub innovations: VecDeque<MeasVector>,
    pub last_update_time: f64,
    /// Consecutive bursts without an associated measurement.
    pub missed: usize,
    /// Last correction fell back to the uncorrected covariance.
    pub correction_singular: bool,
}

impl TrackState {
    /// Starts a track from one measurement by spherical inversion.
    pub fn from_measurement(id: usize, z: &MeasVector, time: f64, cfg: &TrackerConfig) -> Result<Self> {
        let (r, v, el, az) = (z[0], z[1], z[2], z[3]);
        if !(r > 0.0) || el.abs() >= PI / 2.0 {
            return Err(Error::OutOfFieldOfView(format!("cannot start a track at r={r}, elevation={el}")));
        }
        let dir = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
        let pos = dir * r;
        let mut state = State::zeros();
        state.fixed_rows_mut::<3>(0).copy_from(&pos);
        state.fixed_rows_mut::<3>(3).copy_from(&(dir * v));
        // d(pos)/d(r, el, az)
        let jp = Matrix3::from_columns(&[
            dir,
            Vector3::new(-r * el.sin() * az.cos(), -r * el.sin() * az.sin(), r * el.cos()),
            Vector3::new(-r * el.cos() * az.sin(), r * el.cos() * az.cos(), 0.0),
        ]);
        let n = &cfg.meas_noise;
        let sph = Matrix3::from_diagonal(&Vector3::new(n.range.powi(2), n.elevation.powi(2), n.azimuth.powi(2)));
        let mut cov = Covariance::zeros();
        cov.fixed_view_mut::<3, 3>(0, 0).copy_from(&(jp * sph * jp.transpose()));
        cov.fixed_view_mut::<3, 3>(3, 3).copy_from(&(Matrix3::identity() * cfg.init_sigma_velocity.powi(2)));
        let cov = symmetrize(&cov);
        Ok(Self {
            id,
            state,
            cov,
            cov_corrected: cov,
            bias: Covariance::zeros(),
            innovations: VecDeque::with_capacity(cfg.window),
            last_update_time: time,
            missed: 0,
            correction_singular: false,
        })
    }

    /// Propagates by `dt`; the correction is refreshed without measurement
    /// noise.
    pub fn predict(&mut self, dt: f64, cfg: &TrackerConfig) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::InvalidConfig(format!("prediction step {dt} must be positive")));
        }
        let (f, q) = transition_matrices(dt, cfg.sigma_a);
        self.state = f * self.state;
        self.cov = symmetrize(&(f * self.cov * f.transpose() + q));
        self.refresh_correction(&Matrix4::zeros())
    }

    /// Innovation of `z` against the current state.
    pub fn innovation(&self, z: &MeasVector) -> Result<MeasVector> {
        Ok(wrap_innovation(z - measure_fn(&self.state)?))
    }

    /// Squared Mahalanobis distance of `z` under the theoretical innovation
    /// covariance.
    pub fn mahalanobis2(&self, z: &MeasVector, cfg: &TrackerConfig) -> Result<f64> {
        let nu = self.innovation(z)?;
        let g = jacobian(&self.state)?;
        let s = g * self.cov * g.transpose() + cfg.meas_noise.covariance();
        let inv = s.try_inverse().ok_or_else(|| Error::Singular("innovation covariance".into()))?;
        Ok((nu.transpose() * inv * nu)[(0, 0)])
    }

    pub fn update(&mut self, z: &MeasVector, time: f64, cfg: &TrackerConfig) -> Result<()> {
        let nu = self.innovation(z)?;
        let g = jacobian(&self.state)?;
        let r = cfg.meas_noise.covariance();
        let (s, p) = kalman_update(&self.state, &self.cov, &nu, &g, &r)?;
        self.state = s;
        self.cov = p;
        if self.innovations.len() == cfg.window {
            self.innovations.pop_front();
        }
        self.innovations.push_back(nu);
        self.last_update_time = time;
        self.missed = 0;
        self.refresh_correction(&r)
    }

    fn refresh_correction(&mut self, meas_cov: &Matrix4<f64>) -> Result<()> {
        let c = correct_covariance(&self.state, &self.cov, &self.innovations, meas_cov)?;
        self.cov_corrected = c.corrected;
        self.bias = c.bias;
        self.correction_singular = c.singular;
        Ok(())
    }

    pub fn predicted_params(&self) -> Result<PredictedParams> {
        predicted_params_from(&self.state, &self.cov_corrected)
    }

    pub fn predicted_params_uncorrected(&self) -> Result<PredictedParams> {
        predicted_params_from(&self.state, &self.cov)
    }
}

impl From<&Measurement> for MeasVector {
    fn from(m: &Measurement) -> Self {
        MeasVector::new(m.range, m.velocity, m.elevation, m.azimuth)
    }
}

/// Result of gating and greedy assignment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Association {
    /// `(track index, measurement index)`
    pub pairs: Vec<(usize, usize)>,
    pub unassigned_tracks: Vec<usize>,
    pub unassigned_measurements: Vec<usize>,
}

/// Greedy nearest-neighbour assignment: gated pairs are taken in order of
/// increasing Mahalanobis distance. Not globally optimal.
pub fn associate(tracks: &[TrackState], measurements: &[MeasVector], cfg: &TrackerConfig) -> Association {
    let mut candidates = Vec::new();
    for (t, track) in tracks.iter().enumerate() {
        for (m, z) in measurements.iter().enumerate() {
            if let Ok(d2) = track.mahalanobis2(z, cfg) {
                if d2 <= cfg.gate {
                    candidates.push((d2, t, m));
                }
            }
        }
    }
    associate_by_distance(tracks.len(), measurements.len(), candidates)
}

/// Greedy assignment over precomputed `(distance, track, measurement)`
/// candidates.
pub fn associate_by_distance(n_tracks: usize, n_meas: usize, mut candidates: Vec<(f64, usize, usize)>) -> Association {
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut track_used = vec![false; n_tracks];
    let mut meas_used = vec![false; n_meas];
    let mut pairs = Vec::new();
    for (_, t, m) in candidates {
        if !track_used[t] && !meas_used[m] {
            track_used[t] = true;
            meas_used[m] = true;
            pairs.push((t, m));
        }
    }
    Association {
        pairs,
        unassigned_tracks: (0..n_tracks).filter(|&t| !track_used[t]).collect(),
        unassigned_measurements: (0..n_meas).filter(|&m| !meas_used[m]).collect(),
    }
}

/// Multi-target track manager.
#[derive(Debug, Clone, Default)]
pub struct Tracker {
    pub tracks: Vec<TrackState>,
    next_id: usize,
}

/// What a burst did to the track set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BurstOutcome {
    pub updated: Vec<usize>,
    pub spawned: Vec<usize>,
    pub dropped: Vec<usize>,
}

impl Tracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn predict(&mut self, dt: f64, cfg: &TrackerConfig) -> Result<()> {
        for t in &mut self.tracks {
            t.predict(dt, cfg)?;
        }
        Ok(())
    }

    /// Associates the burst's measurements with the (already predicted)
    /// tracks, updates, spawns and drops.
    pub fn process_burst(&mut self, measurements: &[MeasVector], time: f64, cfg: &TrackerConfig) -> Result<BurstOutcome> {
        let assoc = associate(&self.tracks, measurements, cfg);
        let mut out = BurstOutcome::default();
        for &(t, m) in &assoc.pairs {
            self.tracks[t].update(&measurements[m], time, cfg)?;
            out.updated.push(self.tracks[t].id);
        }
        for &t in &assoc.unassigned_tracks {
            self.tracks[t].missed += 1;
        }
        self.tracks.retain(|t| {
            let keep = t.missed <= cfg.max_missed;
            if !keep {
                out.dropped.push(t.id);
            }
            keep
        });
        for &m in &assoc.unassigned_measurements {
            if let Ok(track) = TrackState::from_measurement(self.next_id, &measurements[m], time, cfg) {
                out.spawned.push(track.id);
                self.tracks.push(track);
                self.next_id += 1;
            }
        }
        Ok(out)
    }
}
