use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use ssb_isac::beamforming::{average_sum_rate, beam_pattern, design_beamformers, sampled_sum_rate, CorrelationModel};
use ssb_isac::channel::truth_to_params;
use ssb_isac::sensing::sense_burst;
use ssb_isac::sim::output::{read_measurements, read_priors, write_angle_map, write_dd_map, write_rows};
use ssb_isac::sim::{
    calibrate_meas_noise, propagate_truth, simulate, sweep_experiment, track_measurements, track_scene, Scenario,
    ScenarioConfig, Scheme,
};

#[derive(Parser)]
#[command(name = "ssb-isac", version, about = "SSB sensing, UAV tracking and predictive beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn scenario(&self) -> Result<Scenario> {
        let mut cfg = ScenarioConfig::load(&self.config).with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(Scenario::new(cfg)?)
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Senses the scenario's UAVs at one instant with one SSB beam: writes the
    /// delay-Doppler map, one MUSIC spectrum per peak and the measurements.
    Sense {
        #[command(flatten)]
        common: Common,
        /// SSB beam index; defaults to the beam illuminating the most UAVs.
        #[arg(long)]
        beam: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        time: f64,
    },
    /// Runs the tracker on a measurement log, or on sensed bursts of the
    /// scenario when no log is given.
    Track {
        #[command(flatten)]
        common: Common,
        /// CSV with columns time,r,v,phi,theta (angles in degrees).
        #[arg(long)]
        measurements: Option<PathBuf>,
    },
    /// Designs beams for the users in a priors file and writes the beamformers
    /// and their patterns.
    Beamform {
        #[command(flatten)]
        common: Common,
        /// CSV with columns r,phi,theta,sigma_r,sigma_phi,sigma_theta,noise_var,gamma
        /// (angles in degrees, gamma in dB).
        #[arg(long)]
        priors: PathBuf,
        /// `proposed` (uncertainty-aware) or `nonrobust`.
        #[arg(long, default_value = "proposed")]
        scheme: Scheme,
        /// True-position draws for the expected-rate estimate.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Runs the time-domain simulation.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Single scheme; all four when omitted.
        #[arg(long)]
        scheme: Option<Scheme>,
    },
    /// Monte-Carlo sweep described by the scenario's `[experiment]` table.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Overrides the experiment's trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Single scheme; all four when omitted.
        #[arg(long)]
        scheme: Option<Scheme>,
    },
    /// Estimates the tracker's measurement noise by sensing random targets.
    CalibrateMeasNoise {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 30.0)]
        range_min: f64,
        #[arg(long, default_value_t = 150.0)]
        range_max: f64,
        #[arg(long, default_value_t = 30.0)]
        max_speed: f64,
    },
}

#[derive(Serialize)]
struct MeasurementRow {
    time: f64,
    r: f64,
    v: f64,
    phi: f64,
    theta: f64,
    music_value: f64,
    dd_power: f64,
}

#[derive(Serialize)]
struct MatrixEntry {
    matrix: &'static str,
    row: usize,
    col: usize,
    re: f64,
    im: f64,
}

fn matrix_entries<'a>(name: &'static str, m: &'a ssb_isac::CMat) -> impl Iterator<Item = MatrixEntry> + 'a {
    (0..m.ncols()).flat_map(move |col| {
        (0..m.nrows()).map(move |row| MatrixEntry { matrix: name, row, col, re: m[(row, col)].re, im: m[(row, col)].im })
    })
}

#[derive(Serialize)]
struct SchemeSummary {
    scheme: Scheme,
    average_rate: f64,
    design_failures: usize,
}

#[derive(Serialize)]
struct BeamformSummary {
    scheme: Scheme,
    /// Relaxed (SDR) objective on the models the design used.
    relaxed_rate: f64,
    /// Average sum-rate under the priors' spreads.
    digital_rate: f64,
    hybrid_rate: f64,
    /// Mean sum-rate over sampled true positions.
    sampled_rate: f64,
}

#[derive(Serialize)]
struct CalibrationSummary {
    sigma_range: f64,
    sigma_velocity: f64,
    sigma_elevation_deg: f64,
    sigma_azimuth_deg: f64,
    matched: usize,
    missed: usize,
}

fn schemes(choice: Option<Scheme>) -> Vec<Scheme> {
    choice.map_or_else(|| Scheme::ALL.to_vec(), |s| vec![s])
}

fn sense(common: &Common, beam: Option<usize>, time: f64) -> Result<()> {
    let scn = common.scenario()?;
    let truth = propagate_truth(&scn.config, time);
    let index = match beam {
        Some(b) if b >= scn.plan.beams.len() => bail!("beam {b} out of range (plan has {})", scn.plan.beams.len()),
        Some(b) => b,
        None => (0..scn.plan.beams.len())
            .max_by_key(|&b| {
                let hits = truth.iter().filter(|u| scn.plan.beams[b].contains(u.elevation(), u.azimuth())).count();
                (hits, std::cmp::Reverse(b))
            })
            .unwrap_or(0),
    };
    let mut rng = ChaCha12Rng::seed_from_u64(scn.config.seed);
    let targets = truth.iter().map(|u| truth_to_params(u, &scn.radio, &mut rng)).collect::<Result<Vec<_>, _>>()?;
    let report = sense_burst(&targets, &scn.plan.beams[index], &scn.sensing, &mut rng)?;
    let out = common.out_dir()?;
    write_dd_map(&out.join("dd_map.csv"), &report.dd_map, &scn.sensing.axes())?;
    for (k, spectrum) in report.spectra.iter().enumerate() {
        write_angle_map(&out.join(format!("music_{k}.csv")), &spectrum.values, &spectrum.grid)?;
    }
    let rows: Vec<MeasurementRow> = report
        .measurements
        .iter()
        .map(|m| MeasurementRow {
            time,
            r: m.range,
            v: m.velocity,
            phi: m.elevation.to_degrees(),
            theta: m.azimuth.to_degrees(),
            music_value: m.music_value,
            dd_power: m.dd_power,
        })
        .collect();
    write_rows(&out.join("measurements.csv"), &rows)?;
    info!("beam {index}: {} peaks, {} measurements", report.detections.len(), rows.len());
    for r in &rows {
        println!("r={:.2} m v={:.2} m/s el={:.2} deg az={:.2} deg", r.r, r.v, r.phi, r.theta);
    }
    Ok(())
}

fn track(common: &Common, measurements: Option<&Path>) -> Result<()> {
    let scn = common.scenario()?;
    let rows = match measurements {
        Some(path) => track_measurements(&read_measurements(path)?, &scn.tracker)?,
        None => track_scene(&scn, scn.config.seed)?,
    };
    write_rows(&common.out_dir()?.join("track_log.csv"), &rows)?;
    println!("{} track rows", rows.len());
    Ok(())
}

fn beamform(common: &Common, priors_path: &Path, scheme: Scheme, samples: usize) -> Result<()> {
    let robust = match scheme {
        Scheme::Proposed => true,
        Scheme::NonRobust => false,
        other => bail!("beamform supports proposed or nonrobust, not {other}"),
    };
    let scn = common.scenario()?;
    let priors = read_priors(priors_path)?;
    if priors.is_empty() {
        bail!("{} holds no users", priors_path.display());
    }
    let bf = &scn.config.beamforming;
    let design = design_beamformers(&priors, &scn.array, &scn.radio, bf.p_max(), &bf.design_options(robust, scn.config.seed))?;
    let robust_models = priors
        .iter()
        .map(|p| CorrelationModel::from_prior(p, &scn.array, &scn.radio))
        .collect::<Result<Vec<_>, _>>()?;
    let hybrid = design.hybrid.combined();
    let out = common.out_dir()?;
    let entries: Vec<MatrixEntry> = matrix_entries("rf", &design.hybrid.rf)
        .chain(matrix_entries("bb", &design.hybrid.bb))
        .chain(matrix_entries("hybrid", &hybrid))
        .chain(matrix_entries("digital", &design.digital))
        .collect();
    write_rows(&out.join("beamformers.csv"), &entries)?;
    for k in 0..priors.len() {
        let pattern = beam_pattern(&hybrid.column(k).into_owned(), &scn.array, &scn.radio, &scn.sensing.angle_grid)?;
        write_angle_map(&out.join(format!("beam_pattern_user{k}.csv")), &pattern, &scn.sensing.angle_grid)?;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(scn.config.seed);
    let summary = BeamformSummary {
        scheme,
        relaxed_rate: design.relaxed.objective,
        digital_rate: average_sum_rate(&design.digital, &robust_models),
        hybrid_rate: average_sum_rate(&hybrid, &robust_models),
        sampled_rate: sampled_sum_rate(&hybrid, &priors, &scn.array, &scn.radio, samples, &mut rng),
    };
    println!(
        "{scheme}: relaxed {:.3}, digital {:.3}, hybrid {:.3}, sampled {:.3} bit/s/Hz",
        summary.relaxed_rate, summary.digital_rate, summary.hybrid_rate, summary.sampled_rate
    );
    write_rows(&out.join("summary.csv"), &[summary])?;
    Ok(())
}

fn run_simulation(common: &Common, scheme: Option<Scheme>) -> Result<()> {
    let scn = common.scenario()?;
    let horizon = scn.config.timing.horizon_s;
    let mut rates = Vec::new();
    let mut tracks = Vec::new();
    let mut summary = Vec::new();
    for s in schemes(scheme) {
        let out = simulate(&scn, s, scn.config.seed)?;
        let average_rate = out.average_rate(horizon);
        println!("{s}: {average_rate:.4} bit/s/Hz ({} design failures)", out.design_failures);
        summary.push(SchemeSummary { scheme: s, average_rate, design_failures: out.design_failures });
        rates.extend(out.rates);
        if tracks.is_empty() {
            tracks = out.tracks;
        }
    }
    let dir = common.out_dir()?;
    write_rows(&dir.join("rate_log.csv"), &rates)?;
    write_rows(&dir.join("track_log.csv"), &tracks)?;
    write_rows(&dir.join("summary.csv"), &summary)?;
    Ok(())
}

fn sweep(common: &Common, trials: Option<usize>, scheme: Option<Scheme>) -> Result<()> {
    let scn = common.scenario()?;
    let Some(exp) = scn.config.experiment.clone() else {
        bail!("{} has no [experiment] table", common.config.display());
    };
    let trials = trials.unwrap_or(exp.trials);
    let rows = sweep_experiment(&scn.config, exp.axis, &exp.values, trials, &schemes(scheme))?;
    for r in &rows {
        println!("{}={} {}: {:.4} +- {:.4}", r.axis, r.value, r.scheme, r.mean, r.std);
    }
    write_rows(&common.out_dir()?.join("summary.csv"), &rows)?;
    Ok(())
}

fn calibrate(common: &Common, trials: usize, range: (f64, f64), max_speed: f64) -> Result<()> {
    if !(range.0 > 0.0 && range.1 > range.0) {
        bail!("need 0 < range-min < range-max");
    }
    let scn = common.scenario()?;
    let cal = calibrate_meas_noise(&scn, trials, range, max_speed, scn.config.seed)?;
    let n = cal.noise;
    println!("matched {} of {} targets", cal.matched, cal.matched + cal.missed);
    println!("[tracker.meas_noise]");
    println!("range = {}\nvelocity = {}\nelevation = {}\nazimuth = {}", n.range, n.velocity, n.elevation, n.azimuth);
    write_rows(
        &common.out_dir()?.join("summary.csv"),
        &[CalibrationSummary {
            sigma_range: n.range,
            sigma_velocity: n.velocity,
            sigma_elevation_deg: n.elevation.to_degrees(),
            sigma_azimuth_deg: n.azimuth.to_degrees(),
            matched: cal.matched,
            missed: cal.missed,
        }],
    )?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Sense { common, beam, time } => sense(&common, beam, time),
        Command::Track { common, measurements } => track(&common, measurements.as_deref()),
        Command::Beamform { common, priors, scheme, samples } => beamform(&common, &priors, scheme, samples),
        Command::Simulate { common, scheme } => run_simulation(&common, scheme),
        Command::Sweep { common, trials, scheme } => sweep(&common, trials, scheme),
        Command::CalibrateMeasNoise { common, trials, range_min, range_max, max_speed } => {
            calibrate(&common, trials, (range_min, range_max), max_speed)
        }
    }
}
