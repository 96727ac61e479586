use crate::linalg::kron;
use crate::radio::{steering_y, steering_z, RadioConfig, SsbBeam, UpaConfig};
use crate::{CMat, CVec, C64};

/// Receive analog combiner for SSB sensing: Kronecker pairs of DFT columns,
/// sign-aligned over the SSB sector and scaled to orthonormal columns.
#[derive(Debug, Clone)]
pub struct RxSensingBeamformer {
    /// N_rx x N_rx_rf.
    pub matrix: CMat,
    /// Selected z-axis DFT columns, most correlated first.
    pub z_columns: Vec<usize>,
    /// Selected y-axis DFT columns, most correlated first.
    pub y_columns: Vec<usize>,
}

/// Unnormalised `n x n` DFT matrix, column `c` = `exp(j 2 pi q c / n)`.
pub fn dft_matrix(n: usize) -> CMat {
    CMat::from_fn(n, n, |q, c| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (q * c) as f64 / n as f64))
}

fn top_columns(dft: &CMat, target: &CVec, count: usize) -> Vec<usize> {
    let n = dft.nrows();
    // spatial frequency of the target along this axis
    let psi = if n > 1 { (target[1] * target[0].conj()).arg() } else { 0.0 };
    let two_pi = 2.0 * std::f64::consts::PI;
    let dist = |c: usize| {
        let d = (two_pi * c as f64 / n as f64 - psi).rem_euclid(two_pi);
        d.min(two_pi - d)
    };
    let scores: Vec<f64> = (0..dft.ncols()).map(|c| dft.column(c).dotc(target).norm()).collect();
    let peak = scores.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    // quantised scores make near-ties explicit; they go to the column closest in spatial frequency
    let mut scored: Vec<(usize, i64)> = scores.iter().enumerate().map(|(c, s)| (c, (s / peak * 1e9).round() as i64)).collect();
    scored.sort_by(|a, b| b.1.cmp(&a.1).then(dist(a.0).total_cmp(&dist(b.0))));
    scored.into_iter().take(count).map(|(c, _)| c).collect()
}

/// DFT column referenced to the array centre: its response to any axis
/// factor is a real Dirichlet kernel times a phase shared by all columns.
fn centred_column(dft: &CMat, c: usize) -> CVec {
    let n = dft.nrows();
    let centring = C64::from_polar(1.0, -std::f64::consts::PI * ((n - 1) * c) as f64 / n as f64);
    dft.column(c).map(|x| x * centring)
}

fn kernel(column: &CVec, a: &CVec) -> f64 {
    let n = column.len();
    let psi = if n > 1 { (a[1] * a[0].conj()).arg() } else { 0.0 };
    (column.dotc(a) * C64::from_polar(1.0, -0.5 * (n - 1) as f64 * psi)).re
}

/// Centred columns with the sign pattern that maximises the worst ratio of
/// summed to strongest single response over `samples` (axis factors across
/// the SSB sector), so the chains add coherently inside the sector.
fn signed_columns(dft: &CMat, selected: &[usize], samples: &[CVec]) -> Vec<CVec> {
    let columns: Vec<CVec> = selected.iter().map(|&c| centred_column(dft, c)).collect();
    let kernels: Vec<Vec<f64>> = samples.iter().map(|a| columns.iter().map(|c| kernel(c, a)).collect()).collect();
    let score = |mask: usize| {
        let (mut worst, mut total) = (f64::INFINITY, 0.0);
        for k in &kernels {
            let sum: f64 = k.iter().enumerate().map(|(i, v)| if mask >> i & 1 == 1 { -v } else { *v }).sum();
            let best = k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if best > 0.0 {
                worst = worst.min(sum.abs() / best);
                total += sum.abs();
            }
        }
        (worst, total)
    };
    // the first column's sign is a global phase
    let patterns = 1usize << columns.len().saturating_sub(1);
    let mut best = (0usize, score(0));
    for half in 1..patterns {
        let mask = half << 1;
        let sc = score(mask);
        if sc.0 > best.1 .0 + 1e-12 || (sc.0 >= best.1 .0 - 1e-12 && sc.1 > best.1 .1) {
            best = (mask, sc);
        }
    }
    columns.into_iter().enumerate().map(|(i, c)| if best.0 >> i & 1 == 1 { -c } else { c }).collect()
}

/// Sample points per sector side for the co-phasing reference.
const SECTOR_SAMPLES: usize = 9;

fn sector_points(beam: &SsbBeam) -> Vec<(f64, f64)> {
    let offsets = |width: f64| -> Vec<f64> {
        (0..SECTOR_SAMPLES).map(|i| width * (i as f64 / (SECTOR_SAMPLES - 1) as f64 - 0.5)).collect()
    };
    let (de, da) = (offsets(beam.el_width), offsets(beam.az_width));
    de.iter().flat_map(|e| da.iter().map(move |a| (beam.elevation + e, beam.azimuth + a))).collect()
}

/// Locally-focused selection: per axis keep the DFT columns most correlated
/// with the SSB beam centre and combine every z/y pair.
pub fn design_rx_beamformer(cfg: &UpaConfig, radio: &RadioConfig, beam: &SsbBeam) -> RxSensingBeamformer {
    let dz = dft_matrix(cfg.n_z);
    let dy = dft_matrix(cfg.n_y);
    let z_columns = top_columns(&dz, &steering_z(cfg, radio, beam.elevation), cfg.n_rf_z);
    let y_columns = top_columns(&dy, &steering_y(cfg, radio, beam.elevation, beam.azimuth), cfg.n_rf_y);
    let points = sector_points(beam);
    let sector_z: Vec<CVec> = points.iter().map(|&(e, _)| steering_z(cfg, radio, e)).collect();
    let sector_y: Vec<CVec> = points.iter().map(|&(e, a)| steering_y(cfg, radio, e, a)).collect();
    let z_vectors = signed_columns(&dz, &z_columns, &sector_z);
    let y_vectors = signed_columns(&dy, &y_columns, &sector_y);
    let scale = 1.0 / (cfg.n_elements() as f64).sqrt();
    let mut matrix = CMat::zeros(cfg.n_elements(), cfg.n_rf());
    let mut col = 0;
    for az in &z_vectors {
        for ay in &y_vectors {
            matrix.set_column(col, &kron(az, ay).scale(scale));
            col += 1;
        }
    }
    RxSensingBeamformer { matrix, z_columns, y_columns }
}
