//! Transmit beam patterns over an elevation/azimuth grid.

use crate::radio::{steering_vector, RadioConfig, UpaConfig};
use crate::sensing::AngleGrid;
use crate::{CVec, Error, Result};
use nalgebra::DMatrix;

/// Linear gain `|a(phi, theta)^H w|^2`, rows over elevation, columns over
/// azimuth.
pub fn beam_gain(w: &CVec, cfg: &UpaConfig, radio: &RadioConfig, grid: &AngleGrid) -> Result<DMatrix<f64>> {
    if w.len() != cfg.n_elements() {
        return Err(Error::Dimension(format!("beamformer of length {} for {} elements", w.len(), cfg.n_elements())));
    }
    let mut out = DMatrix::zeros(grid.elevations.len(), grid.azimuths.len());
    for (i, &phi) in grid.elevations.iter().enumerate() {
        for (j, &theta) in grid.azimuths.iter().enumerate() {
            out[(i, j)] = steering_vector(cfg, radio, phi, theta).dotc(w).norm_sqr();
        }
    }
    Ok(out)
}

/// [`beam_gain`] in dB relative to its maximum (peak at 0 dB). An all-zero
/// beamformer yields negative infinity everywhere.
pub fn beam_pattern(w: &CVec, cfg: &UpaConfig, radio: &RadioConfig, grid: &AngleGrid) -> Result<DMatrix<f64>> {
    let gain = beam_gain(w, cfg, radio, grid)?;
    let peak = gain.max();
    Ok(gain.map(|g| if peak > 0.0 { 10.0 * (g / peak).log10() } else { f64::NEG_INFINITY }))
}
