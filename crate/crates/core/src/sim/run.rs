//! The two-phase proposed loop and the feedback-based baseline.

use std::fmt;
use std::str::FromStr;

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::{design_beamformers, UserPrior};
use crate::channel::{comm_channel, comm_receive_snr, truth_to_params, UavTruth};
use crate::radio::{ssb_tx_beamformer, steering_vector, UpaConfig};
use crate::sensing::{sense_burst, Measurement};
use crate::sim::config::Scenario;
use crate::sim::output::MeasurementRecord;
use crate::sim::trajectory::propagate_truth;
use crate::tracker::{MeasVector, PredictedParams, Tracker, TrackerConfig};
use crate::{CMat, CVec, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Sensing-assisted prediction with uncertainty-aware beams.
    Proposed,
    /// Sensing-assisted prediction, beams designed for point estimates.
    #[serde(rename = "nonrobust")]
    NonRobust,
    /// Feedback refinement with the sparse setting.
    Baseline,
    /// Feedback refinement with the dense setting.
    BaselineDense,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::NonRobust, Scheme::Baseline, Scheme::BaselineDense];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::NonRobust => "nonrobust",
            Scheme::Baseline => "baseline",
            Scheme::BaselineDense => "baseline-dense",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.tag() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme '{s}'")))
    }
}

/// One interval of constant rate for one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub time: f64,
    pub duration: f64,
    pub user: usize,
    /// Shannon rate (bit/s/Hz); zero over overhead intervals.
    pub rate: f64,
    pub scheme: Scheme,
}

/// Track snapshot at a prediction step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackRow {
    pub time: f64,
    pub track: usize,
    pub user: Option<usize>,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub range: f64,
    pub elevation: f64,
    pub azimuth: f64,
    /// From the corrected covariance.
    pub sigma_range: f64,
    pub sigma_elevation: f64,
    pub sigma_azimuth: f64,
    /// From the filter covariance alone.
    pub sigma_range_raw: f64,
    pub sigma_elevation_raw: f64,
    pub sigma_azimuth_raw: f64,
    pub bias_trace: f64,
    pub true_range: Option<f64>,
    pub true_elevation: Option<f64>,
    pub true_azimuth: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct SimOutput {
    pub rates: Vec<RateRow>,
    pub tracks: Vec<TrackRow>,
    /// Slots whose beam design failed and reused the previous beams.
    pub design_failures: usize,
}

impl SimOutput {
    /// Sum over users of the time-averaged rate.
    pub fn average_rate(&self, horizon: f64) -> f64 {
        self.rates.iter().map(|r| r.rate * r.duration).sum::<f64>() / horizon
    }
}

/// Zero-rate overhead owed by each slot; overhead longer than a slot spills
/// into the next.
#[derive(Debug, Clone, Copy, Default)]
struct OverheadClock {
    debt: f64,
}

impl OverheadClock {
    fn slot(&mut self, len: f64, charged: f64) -> (f64, f64) {
        let total = self.debt + charged;
        let overhead = total.min(len);
        self.debt = total - overhead;
        (overhead, len - overhead)
    }
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Timeline {
    kf: f64,
    n_slots: usize,
    burst_every: usize,
}

impl Timeline {
    fn new(scn: &Scenario) -> Self {
        let t = &scn.config.timing;
        Self {
            kf: t.kf_period_s,
            n_slots: (t.horizon_s / t.kf_period_s).round() as usize,
            burst_every: (t.ssb_period_s / t.kf_period_s).round() as usize,
        }
    }

    fn every(&self, period: f64) -> usize {
        (period / self.kf).round().max(1.0) as usize
    }
}

fn push_rates(out: &mut SimOutput, t_s: f64, overhead: f64, data: f64, rates: &[f64], scheme: Scheme) {
    for (user, &rate) in rates.iter().enumerate() {
        if overhead > 0.0 {
            out.rates.push(RateRow { time: t_s, duration: overhead, user, rate: 0.0, scheme });
        }
        if data > 0.0 {
            out.rates.push(RateRow { time: t_s + overhead, duration: data, user, rate, scheme });
        }
    }
}

fn true_rates(truth: &[UavTruth], w: Option<&CMat>, scn: &Scenario, rng: &mut ChaCha12Rng) -> Result<Vec<f64>> {
    let Some(w) = w else {
        return Ok(vec![0.0; truth.len()]);
    };
    let channels = truth.iter().map(|u| comm_channel(u, &scn.array, &scn.radio, rng)).collect::<Result<Vec<_>>>()?;
    let sinr = comm_receive_snr(&channels, w, scn.config.beamforming.noise_var());
    Ok(sinr.into_iter().map(|s| (1.0 + s).log2()).collect())
}

/// Senses every SSB beam that illuminates a UAV and merges duplicate
/// measurements of one target seen through several beams.
pub fn sense_scene(scn: &Scenario, truth: &[UavTruth], rng: &mut ChaCha12Rng) -> Result<Vec<Measurement>> {
    let targets = truth.iter().map(|u| truth_to_params(u, &scn.radio, rng)).collect::<Result<Vec<_>>>()?;
    let mut found = Vec::new();
    for beam in &scn.plan.beams {
        if truth.iter().any(|u| beam.contains(u.elevation(), u.azimuth())) {
            found.extend(sense_burst(&targets, beam, &scn.sensing, rng)?.measurements);
        }
    }
    let axes = scn.sensing.axes();
    let angle_tol = 2.0 * scn.sensing.config.music.grid_step_deg.to_radians();
    found.sort_by(|a, b| b.dd_power.total_cmp(&a.dd_power));
    let mut merged: Vec<Measurement> = Vec::new();
    for m in found {
        let duplicate = merged.iter().any(|k| {
            (k.range - m.range).abs() <= axes.range_bin
                && (k.velocity - m.velocity).abs() <= axes.velocity_bin
                && (k.elevation - m.elevation).abs() <= angle_tol
                && (k.azimuth - m.azimuth).abs() <= angle_tol
        });
        if !duplicate {
            merged.push(m);
        }
    }
    for m in &merged {
        debug!(
            "measurement r={:.1} v={:.1} el={:.1} az={:.1} power={:.3e}",
            m.range,
            m.velocity,
            m.elevation.to_degrees(),
            m.azimuth.to_degrees(),
            m.dd_power
        );
    }
    Ok(merged)
}

/// Keeps each user's track while it lives; otherwise picks the closest free
/// track to the user's true position. Truth is used for labelling only.
fn assign_tracks(tracker: &Tracker, truth: &[UavTruth], assigned: &mut [Option<usize>]) {
    for slot in assigned.iter_mut() {
        if slot.is_some_and(|id| !tracker.tracks.iter().any(|t| t.id == id)) {
            *slot = None;
        }
    }
    for (k, u) in truth.iter().enumerate() {
        if assigned[k].is_some() {
            continue;
        }
        let gate = (0.1 * u.range()).max(10.0);
        assigned[k] = tracker
            .tracks
            .iter()
            .filter(|t| !assigned.contains(&Some(t.id)))
            .map(|t| ((t.state.fixed_rows::<3>(0).into_owned() - u.position).norm(), t.id))
            .filter(|(d, _)| *d <= gate)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, id)| id);
    }
}

/// Beamforming prior from predicted parameters, with spreads clipped so the
/// quadrature stays inside its domain.
pub fn prior_from_prediction(p: &PredictedParams, noise_var: f64, gamma: f64) -> UserPrior {
    let el_room = (std::f64::consts::FRAC_PI_2 - p.elevation.abs() - 1e-6).max(0.0) / 3.0;
    UserPrior {
        range: p.range,
        elevation: p.elevation,
        azimuth: p.azimuth,
        sigma_range: p.sigma_range.min(p.range / 4.5),
        sigma_elevation: p.sigma_elevation.min(el_room),
        sigma_azimuth: p.sigma_azimuth,
        noise_var,
        sinr_threshold: gamma,
    }
}

fn log_tracks(out: &mut SimOutput, tracker: &Tracker, assigned: &[Option<usize>], truth: &[UavTruth], time: f64) {
    for t in &tracker.tracks {
        let (Ok(c), Ok(raw)) = (t.predicted_params(), t.predicted_params_uncorrected()) else {
            continue;
        };
        let user = assigned.iter().position(|a| *a == Some(t.id));
        let u = user.map(|k| &truth[k]);
        let s = &t.state;
        out.tracks.push(TrackRow {
            time,
            track: t.id,
            user,
            x: s[0],
            y: s[1],
            z: s[2],
            vx: s[3],
            vy: s[4],
            vz: s[5],
            range: c.range,
            elevation: c.elevation,
            azimuth: c.azimuth,
            sigma_range: c.sigma_range,
            sigma_elevation: c.sigma_elevation,
            sigma_azimuth: c.sigma_azimuth,
            sigma_range_raw: raw.sigma_range,
            sigma_elevation_raw: raw.sigma_elevation,
            sigma_azimuth_raw: raw.sigma_azimuth,
            bias_trace: t.bias.trace(),
            true_range: u.map(|u| u.range()),
            true_elevation: u.map(|u| u.elevation()),
            true_azimuth: u.map(|u| u.azimuth()),
        });
    }
}

/// Tracking only: SS bursts every `T` over the scenario, tracks logged at
/// every prediction step.
pub fn track_scene(scn: &Scenario, seed: u64) -> Result<Vec<TrackRow>> {
    let cfg = &scn.config;
    let tl = Timeline::new(scn);
    let mut rng = rng_stream(seed, 1);
    let mut tracker = Tracker::new();
    let mut assigned = vec![None; cfg.uav.len()];
    let mut out = SimOutput::default();
    for i in 0..tl.n_slots {
        let t = i as f64 * tl.kf;
        if i > 0 {
            tracker.predict(tl.kf, &scn.tracker)?;
        }
        let truth = propagate_truth(cfg, t);
        if i % tl.burst_every == 0 {
            let z: Vec<MeasVector> = sense_scene(scn, &truth, &mut rng)?.iter().map(MeasVector::from).collect();
            tracker.process_burst(&z, t, &scn.tracker)?;
        }
        assign_tracks(&tracker, &truth, &mut assigned);
        log_tracks(&mut out, &tracker, &assigned, &truth, t);
    }
    Ok(out.tracks)
}

/// Replays a measurement log: rows sharing a timestamp form one burst.
/// Tracks are logged after every burst.
pub fn track_measurements(records: &[MeasurementRecord], cfg: &TrackerConfig) -> Result<Vec<TrackRow>> {
    let mut tracker = Tracker::new();
    let mut out = SimOutput::default();
    let mut now: Option<f64> = None;
    let mut i = 0;
    while i < records.len() {
        let t = records[i].time;
        let j = i + records[i..].iter().take_while(|r| r.time == t).count();
        if let Some(prev) = now {
            if t < prev {
                return Err(Error::InvalidConfig(format!("measurement log goes back in time at t={t}")));
            }
            tracker.predict(t - prev, cfg)?;
        }
        now = Some(t);
        let z: Vec<MeasVector> = records[i..j].iter().map(|r| r.vector()).collect();
        tracker.process_burst(&z, t, cfg)?;
        log_tracks(&mut out, &tracker, &[], &[], t);
        i = j;
    }
    Ok(out.tracks)
}

/// Sensing-assisted predictive beamforming: SS bursts every `T` feed the
/// tracker; every prediction step designs beams for the slot's midpoint.
pub fn run_proposed(scn: &Scenario, robust: bool, seed: u64) -> Result<SimOutput> {
    let cfg = &scn.config;
    let scheme = if robust { Scheme::Proposed } else { Scheme::NonRobust };
    let bf = &cfg.beamforming;
    let (p_max, noise_var, gamma) = (bf.p_max(), bf.noise_var(), bf.gamma());
    let tl = Timeline::new(scn);
    let n_users = cfg.uav.len();
    let mut sense_rng = rng_stream(seed, 1);
    let mut phase_rng = rng_stream(seed, 2);
    let mut tracker = Tracker::new();
    let mut tracker_time = 0.0;
    let mut assigned = vec![None; n_users];
    let mut beams: Option<CMat> = None;
    let mut clock = OverheadClock::default();
    let mut out = SimOutput::default();
    for i in 0..tl.n_slots {
        let t_s = i as f64 * tl.kf;
        tracker.predict(t_s - tracker_time, &scn.tracker)?;
        tracker_time = t_s;
        let mut charged = 0.0;
        let truth_now = propagate_truth(cfg, t_s);
        if i % tl.burst_every == 0 {
            let meas = sense_scene(scn, &truth_now, &mut sense_rng)?;
            let z: Vec<MeasVector> = meas.iter().map(MeasVector::from).collect();
            tracker.process_burst(&z, t_s, &scn.tracker)?;
            charged += scn.burst_duration();
        }
        assign_tracks(&tracker, &truth_now, &mut assigned);
        log_tracks(&mut out, &tracker, &assigned, &truth_now, t_s);

        let (overhead, data) = clock.slot(tl.kf, charged);
        let t_mid = t_s + overhead + data / 2.0;
        let mut users = Vec::new();
        let mut priors = Vec::new();
        for (k, id) in assigned.iter().enumerate() {
            let Some(track) = id.and_then(|id| tracker.tracks.iter().find(|t| t.id == id)) else {
                continue;
            };
            let mut ahead = track.clone();
            let predicted = ahead.predict(t_mid - t_s, &scn.tracker).and_then(|_| ahead.predicted_params());
            match predicted {
                Ok(p) => {
                    users.push(k);
                    priors.push(prior_from_prediction(&p, noise_var, gamma));
                }
                Err(e) => warn!("t={t_s:.3}: prediction for user {k} failed: {e}"),
            }
        }
        if !users.is_empty() {
            let opts = bf.design_options(robust, seed.wrapping_add(i as u64));
            match design_beamformers(&priors, &scn.array, &scn.radio, p_max, &opts) {
                Ok(d) => {
                    let w = d.hybrid.combined();
                    let mut full = CMat::zeros(scn.array.n_elements(), n_users);
                    for (col, &k) in users.iter().enumerate() {
                        full.set_column(k, &w.column(col));
                    }
                    beams = Some(full);
                }
                Err(e) => {
                    warn!("t={t_s:.3}: beam design failed, keeping previous beams: {e}");
                    out.design_failures += 1;
                }
            }
        }
        let truth_mid = propagate_truth(cfg, t_mid);
        let rates = true_rates(&truth_mid, beams.as_ref(), scn, &mut phase_rng)?;
        push_rates(&mut out, t_s, overhead, data, &rates, scheme);
    }
    Ok(out)
}

/// Oversampled 2D DFT codebook of narrow beams over the front half-space.
#[derive(Debug, Clone)]
pub struct Codebook {
    /// `(u_y, u_z)` spatial frequencies, `u_z = sin(el)`,
    /// `u_y = sin(az) cos(el)`.
    pub frequencies: Vec<(f64, f64)>,
    pub directions: Vec<(f64, f64)>,
}

impl Codebook {
    pub fn new(cfg: &UpaConfig, oversampling: usize) -> Self {
        let axis = |n: usize| -> Vec<f64> {
            let m = n * oversampling;
            (0..m).map(|j| -1.0 + 2.0 * j as f64 / m as f64).collect()
        };
        let mut frequencies = Vec::new();
        let mut directions = Vec::new();
        for &uz in &axis(cfg.n_z) {
            for &uy in &axis(cfg.n_y) {
                let c = (1.0 - uz * uz).sqrt();
                if uy.abs() >= c {
                    continue;
                }
                frequencies.push((uy, uz));
                directions.push((uz.asin(), (uy / c).asin()));
            }
        }
        Self { frequencies, directions }
    }

    pub fn nearest_to(&self, el: f64, az: f64) -> usize {
        let target = (az.sin() * el.cos(), el.sin());
        self.closest(target, 1)[0]
    }

    /// The `n` codewords nearest codeword `index` (itself included).
    pub fn neighbours(&self, index: usize, n: usize) -> Vec<usize> {
        self.closest(self.frequencies[index], n)
    }

    fn closest(&self, (uy, uz): (f64, f64), n: usize) -> Vec<usize> {
        let mut order: Vec<(f64, usize)> = self
            .frequencies
            .iter()
            .enumerate()
            .map(|(i, &(y, z))| ((y - uy).powi(2) + (z - uz).powi(2), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.into_iter().take(n).map(|(_, i)| i).collect()
    }

    /// Unit-norm transmit weights of codeword `index`.
    pub fn weights(&self, index: usize, cfg: &UpaConfig, radio: &crate::radio::RadioConfig) -> CVec {
        let (el, az) = self.directions[index];
        let a = steering_vector(cfg, radio, el, az);
        let n = a.norm();
        a.unscale(n)
    }
}

/// Feedback-based beam management: SSB wide-beam selection every burst,
/// narrow-beam refinement every refinement interval, static beams in
/// between. Beam choices use the true received power (perfect feedback).
pub fn run_baseline(scn: &Scenario, dense: bool, seed: u64) -> Result<SimOutput> {
    let cfg = &scn.config;
    let b = &cfg.baseline;
    let (interval, n_refine, scheme) = if dense {
        (b.dense_interval_s, b.dense_beams, Scheme::BaselineDense)
    } else {
        (b.refine_interval_s, b.refine_beams, Scheme::Baseline)
    };
    let tl = Timeline::new(scn);
    let refine_every = tl.every(interval);
    let n_users = cfg.uav.len();
    let p_max = cfg.beamforming.p_max();
    let codebook = Codebook::new(&scn.array, b.oversampling);
    let codewords: Vec<CVec> = (0..codebook.directions.len()).map(|i| codebook.weights(i, &scn.array, &scn.radio)).collect();
    let ssb: Vec<CVec> = scn.plan.beams.iter().map(|beam| ssb_tx_beamformer(&scn.array, &scn.radio, beam).weights()).collect();
    let mut phase_rng = rng_stream(seed, 2);
    let mut current: Vec<Option<usize>> = vec![None; n_users];
    let mut clock = OverheadClock::default();
    let mut out = SimOutput::default();
    let t_o = scn.radio.symbol_duration_s;
    let feedback_cost = (b.feedback_symbols * n_users) as f64 * t_o;
    let refine_cost = (n_refine * n_users) as f64 * t_o + feedback_cost;
    for i in 0..tl.n_slots {
        let t_s = i as f64 * tl.kf;
        let truth = propagate_truth(cfg, t_s);
        let steering: Vec<CVec> =
            truth.iter().map(|u| steering_vector(&scn.array, &scn.radio, u.elevation(), u.azimuth())).collect();
        let gain = |a: &CVec, w: &CVec| a.dotc(w).norm_sqr();
        let mut charged = 0.0;
        if i % tl.burst_every == 0 {
            for (k, a) in steering.iter().enumerate() {
                let best = (0..ssb.len()).max_by(|&x, &y| gain(a, &ssb[x]).total_cmp(&gain(a, &ssb[y]))).unwrap_or(0);
                let beam = &scn.plan.beams[best];
                let inside = current[k].is_some_and(|c| {
                    let (el, az) = codebook.directions[c];
                    beam.contains(el, az)
                });
                if !inside {
                    current[k] = Some(codebook.nearest_to(beam.elevation, beam.azimuth));
                }
            }
            charged += scn.burst_duration() + feedback_cost;
        }
        if i % refine_every == 0 {
            for (k, a) in steering.iter().enumerate() {
                if let Some(c) = current[k] {
                    let cands = codebook.neighbours(c, n_refine);
                    current[k] = cands.into_iter().max_by(|&x, &y| gain(a, &codewords[x]).total_cmp(&gain(a, &codewords[y])));
                }
            }
            charged += refine_cost;
        }
        let (overhead, data) = clock.slot(tl.kf, charged);
        let t_mid = t_s + overhead + data / 2.0;
        let active = current.iter().filter(|c| c.is_some()).count().max(1);
        let mut w = CMat::zeros(scn.array.n_elements(), n_users);
        for (k, c) in current.iter().enumerate() {
            if let Some(c) = c {
                w.set_column(k, &codewords[*c].scale((p_max / active as f64).sqrt()));
            }
        }
        let truth_mid = propagate_truth(cfg, t_mid);
        let rates = true_rates(&truth_mid, Some(&w), scn, &mut phase_rng)?;
        push_rates(&mut out, t_s, overhead, data, &rates, scheme);
    }
    Ok(out)
}

/// Runs one scheme.
pub fn simulate(scn: &Scenario, scheme: Scheme, seed: u64) -> Result<SimOutput> {
    match scheme {
        Scheme::Proposed => run_proposed(scn, true, seed),
        Scheme::NonRobust => run_proposed(scn, false, seed),
        Scheme::Baseline => run_baseline(scn, false, seed),
        Scheme::BaselineDense => run_baseline(scn, true, seed),
    }
}
