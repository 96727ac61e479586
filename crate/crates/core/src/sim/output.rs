//! CSV readers and writers (one header line, `.` decimals, UTF-8).

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::beamforming::UserPrior;
use crate::sensing::{AngleGrid, DdAxes};
use crate::tracker::MeasVector;
use crate::Result;

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DdCell {
    delay_bin: usize,
    doppler_bin: i64,
    range: f64,
    velocity: f64,
    power: f64,
}

/// Delay-Doppler map in long format, Doppler axis signed.
pub fn write_dd_map(path: &Path, map: &DMatrix<f64>, axes: &DdAxes) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for n in 0..map.nrows() {
        for m in 0..map.ncols() {
            let signed = axes.signed_doppler(m);
            w.serialize(DdCell {
                delay_bin: n,
                doppler_bin: signed,
                range: axes.range(n),
                velocity: axes.velocity(m),
                power: map[(n, m)],
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct AngleCell {
    elevation_deg: f64,
    azimuth_deg: f64,
    value: f64,
}

/// Any elevation x azimuth matrix over `grid` in long format.
pub fn write_angle_map(path: &Path, values: &DMatrix<f64>, grid: &AngleGrid) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (i, el) in grid.elevations.iter().enumerate() {
        for (j, az) in grid.azimuths.iter().enumerate() {
            w.serialize(AngleCell { elevation_deg: el.to_degrees(), azimuth_deg: az.to_degrees(), value: values[(i, j)] })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Row of a priors file; angles in degrees, `gamma` in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorRecord {
    pub r: f64,
    pub phi: f64,
    pub theta: f64,
    pub sigma_r: f64,
    pub sigma_phi: f64,
    pub sigma_theta: f64,
    pub noise_var: f64,
    pub gamma: f64,
}

impl From<PriorRecord> for UserPrior {
    fn from(p: PriorRecord) -> Self {
        UserPrior {
            range: p.r,
            elevation: p.phi.to_radians(),
            azimuth: p.theta.to_radians(),
            sigma_range: p.sigma_r,
            sigma_elevation: p.sigma_phi.to_radians(),
            sigma_azimuth: p.sigma_theta.to_radians(),
            noise_var: p.noise_var,
            sinr_threshold: 10f64.powf(p.gamma / 10.0),
        }
    }
}

pub fn read_priors(path: &Path) -> Result<Vec<UserPrior>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    r.deserialize::<PriorRecord>().map(|row| Ok(row?.into())).collect()
}

/// Row of a measurement log; angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub time: f64,
    pub r: f64,
    pub v: f64,
    pub phi: f64,
    pub theta: f64,
}

impl MeasurementRecord {
    pub fn vector(&self) -> MeasVector {
        MeasVector::new(self.r, self.v, self.phi.to_radians(), self.theta.to_radians())
    }
}

pub fn read_measurements(path: &Path) -> Result<Vec<MeasurementRecord>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    r.deserialize().map(|row| Ok(row?)).collect()
}
