//! 2D beamspace MUSIC over an elevation/azimuth grid.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{eigh_desc, hermitize};
use crate::radio::{steering_vector, steering_y, steering_z, RadioConfig, UpaConfig};
use crate::{CMat, CVec, Error, Result};

/// Rectangular search grid (radians).
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    pub elevations: Vec<f64>,
    pub azimuths: Vec<f64>,
}

impl AngleGrid {
    /// Inclusive grid with spacing `step` over both ranges.
    pub fn uniform(el_range: (f64, f64), az_range: (f64, f64), step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidConfig("angle grid step must be positive".into()));
        }
        let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| lo + i as f64 * step).collect()
        };
        Ok(Self { elevations: axis(el_range), azimuths: axis(az_range) })
    }

    pub fn len(&self) -> usize {
        self.elevations.len() * self.azimuths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MusicConfig {
    /// Fixed source count; `None` uses the eigenvalue-gap rule.
    pub n_sources: Option<usize>,
    /// Eigenvalues below this fraction of the largest count as noise.
    pub eigen_gap: f64,
    /// Eigenvalues below this multiple of the known noise eigenvalue count
    /// as noise.
    pub noise_floor_factor: f64,
    /// Grid step (degrees).
    pub grid_step_deg: f64,
}

impl Default for MusicConfig {
    fn default() -> Self {
        Self { n_sources: None, eigen_gap: 0.01, noise_floor_factor: 4.0, grid_step_deg: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MusicPeak {
    pub elevation: f64,
    pub azimuth: f64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct MusicSpectrum {
    /// `values[(e, a)]` at `grid.elevations[e]`, `grid.azimuths[a]`.
    pub values: DMatrix<f64>,
    pub grid: AngleGrid,
    pub peaks: Vec<MusicPeak>,
    pub n_sources: usize,
}

/// `W^H a(phi, theta)`.
pub fn beamspace_steering(w_rx: &CMat, cfg: &UpaConfig, radio: &RadioConfig, phi: f64, theta: f64) -> CVec {
    w_rx.adjoint() * steering_vector(cfg, radio, phi, theta)
}

/// Smallest `k` with `eig[k] / eig[0] < gap` or `eig[k] < floor`
/// (eigenvalues descending), clamped to `[1, eig.len() - 1]`.
pub fn estimate_source_count(eigenvalues: &[f64], gap: f64, floor: f64) -> usize {
    let cap = eigenvalues.len().saturating_sub(1).max(1);
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return 1;
    }
    let k = eigenvalues.iter().position(|&l| l / top < gap || l < floor).unwrap_or(eigenvalues.len());
    k.clamp(1, cap)
}

/// MUSIC pseudo-spectrum `||a~||^2 / ||G^H a~||^2` of the snapshots `y`
/// (N_rf x N_ss) with `a~ = W^H a`, plus its strongest local maxima.
/// `noise_eigenvalue` is the per-chain snapshot noise power, when known.
pub fn music_spectrum(
    y: &CMat,
    w_rx: &CMat,
    cfg: &UpaConfig,
    radio: &RadioConfig,
    grid: &AngleGrid,
    music: &MusicConfig,
    noise_eigenvalue: Option<f64>,
) -> Result<MusicSpectrum> {
    let n_rf = w_rx.ncols();
    if y.nrows() != n_rf {
        return Err(Error::Dimension(format!("snapshots have {} rows for {} RF chains", y.nrows(), n_rf)));
    }
    if y.ncols() == 0 || grid.is_empty() {
        return Err(Error::Dimension("empty snapshot matrix or search grid".into()));
    }
    let r = hermitize(&((y * y.adjoint()).unscale(y.ncols() as f64)));
    let (eig, vecs) = eigh_desc(&r);
    let n_sources = match music.n_sources {
        Some(k) => k,
        None => estimate_source_count(&eig, music.eigen_gap, noise_eigenvalue.map_or(0.0, |n| n * music.noise_floor_factor)),
    };
    if n_sources == 0 || n_sources >= n_rf {
        return Err(Error::InvalidConfig(format!("{n_sources} sources with {n_rf} RF chains")));
    }
    let noise = vecs.columns(n_sources, n_rf - n_sources).into_owned();
    let noise_h = noise.adjoint();
    let wh = w_rx.adjoint();
    let (ne, na) = (grid.elevations.len(), grid.azimuths.len());
    let n_y = cfg.n_y;
    let mut values = DMatrix::zeros(ne, na);
    for (e, &phi) in grid.elevations.iter().enumerate() {
        // a = a_z (x) a_y, so W^H a = B a_y with the z factor folded into B
        let az = steering_z(cfg, radio, phi);
        let b = CMat::from_fn(n_rf, n_y, |c, q| (0..cfg.n_z).map(|p| wh[(c, p * n_y + q)] * az[p]).sum());
        for (a, &theta) in grid.azimuths.iter().enumerate() {
            let at = &b * steering_y(cfg, radio, phi, theta);
            let proj = (&noise_h * &at).norm_squared();
            values[(e, a)] = at.norm_squared() / proj.max(f64::MIN_POSITIVE);
        }
    }
    let peaks = local_maxima(&values, grid, n_sources);
    Ok(MusicSpectrum { values, grid: grid.clone(), peaks, n_sources })
}

fn local_maxima(values: &DMatrix<f64>, grid: &AngleGrid, count: usize) -> Vec<MusicPeak> {
    let (ne, na) = values.shape();
    let mut peaks = Vec::new();
    for e in 0..ne {
        for a in 0..na {
            let v = values[(e, a)];
            let mut is_max = true;
            for de in -1i64..=1 {
                for da in -1i64..=1 {
                    let (ee, aa) = (e as i64 + de, a as i64 + da);
                    if (de, da) == (0, 0) || ee < 0 || aa < 0 || ee >= ne as i64 || aa >= na as i64 {
                        continue;
                    }
                    let w = values[(ee as usize, aa as usize)];
                    // ties go to the earlier cell so plateaus yield one peak
                    if w > v || (w == v && (ee, aa) < (e as i64, a as i64)) {
                        is_max = false;
                    }
                }
            }
            if is_max {
                peaks.push(MusicPeak { elevation: grid.elevations[e], azimuth: grid.azimuths[a], value: v });
            }
        }
    }
    peaks.sort_by(|x, y| y.value.total_cmp(&x.value));
    peaks.truncate(count);
    peaks
}
