//! LS channel estimation and the IDFT/DFT delay-Doppler periodogram.

use nalgebra::DMatrix;
use rustfft::FftPlanner;

use crate::channel::ReceivedGrid;
use crate::radio::SsbGrid;
use crate::sensing::detect::Detection;
use crate::{CMat, Error, Result, C64};

/// Least-squares channel frequency response, one `n_sc x n_sym` grid per
/// RF chain; zero off the SSB occupancy mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Cfr {
    pub chains: Vec<CMat>,
}

/// Per-chain delay profiles and delay-Doppler profiles.
#[derive(Debug, Clone)]
pub struct DelayDopplerCube {
    /// `d[i, m]` per chain: IDFT along subcarriers, `n_idft x n_sym`.
    pub delay_profiles: Vec<CMat>,
    /// `v[i, j]` per chain: `n_idft x m_dft`.
    pub values: Vec<CMat>,
    pub n_idft: usize,
    pub m_dft: usize,
}

pub fn ls_cfr(rx: &ReceivedGrid, grid: &SsbGrid) -> Result<Cfr> {
    let (n_sc, n_sym) = (grid.n_sc(), grid.n_sym());
    let mut chains = Vec::with_capacity(rx.n_chains());
    for chain in &rx.chains {
        if chain.shape() != (n_sc, n_sym) {
            return Err(Error::Dimension(format!(
                "received grid {:?} does not match SSB grid {:?}",
                chain.shape(),
                (n_sc, n_sym)
            )));
        }
        chains.push(CMat::from_fn(n_sc, n_sym, |n, m| {
            if grid.is_occupied(n, m) {
                chain[(n, m)] / grid.payload[(n, m)]
            } else {
                C64::new(0.0, 0.0)
            }
        }));
    }
    Ok(Cfr { chains })
}

/// Zero-pads the subcarrier axis to `n_idft` and applies the IDFT kernel
/// `exp(+j 2 pi n i / n_idft)` (unnormalised) per symbol.
pub fn delay_profiles(cfr: &Cfr, n_idft: usize) -> Result<Vec<CMat>> {
    let n_sc = cfr.chains.first().map_or(0, |c| c.nrows());
    if n_idft < n_sc.max(240) {
        return Err(Error::InvalidConfig(format!("N_IDFT = {n_idft} is smaller than the {n_sc} SSB subcarriers")));
    }
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(n_idft);
    let mut buf = vec![C64::new(0.0, 0.0); n_idft];
    let mut out = Vec::with_capacity(cfr.chains.len());
    for chain in &cfr.chains {
        let n_sym = chain.ncols();
        let mut d = CMat::zeros(n_idft, n_sym);
        for m in 0..n_sym {
            buf.iter_mut().for_each(|b| *b = C64::new(0.0, 0.0));
            buf[..n_sc].copy_from_slice(chain.column(m).as_slice());
            ifft.process(&mut buf);
            d.column_mut(m).copy_from_slice(&buf);
        }
        out.push(d);
    }
    Ok(out)
}

/// Zero-pads the symbol axis of a delay profile to `m_dft` and applies the
/// DFT kernel `exp(-j 2 pi m j / m_dft)`.
pub fn doppler_transform(profile: &CMat, m_dft: usize) -> Result<CMat> {
    let (n_idft, n_sym) = profile.shape();
    if m_dft < n_sym.max(4) {
        return Err(Error::InvalidConfig(format!("M_DFT = {m_dft} is smaller than the {n_sym} SSB symbols")));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m_dft);
    let mut buf = vec![C64::new(0.0, 0.0); m_dft];
    let mut out = CMat::zeros(n_idft, m_dft);
    for i in 0..n_idft {
        buf.iter_mut().for_each(|b| *b = C64::new(0.0, 0.0));
        for m in 0..n_sym {
            buf[m] = profile[(i, m)];
        }
        fft.process(&mut buf);
        for (j, v) in buf.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}

pub fn delay_doppler(cfr: &Cfr, n_idft: usize, m_dft: usize) -> Result<DelayDopplerCube> {
    let n_sym = cfr.chains.first().map_or(0, |c| c.ncols());
    if m_dft < n_sym.max(4) {
        return Err(Error::InvalidConfig(format!("M_DFT = {m_dft} is smaller than the {n_sym} SSB symbols")));
    }
    let delay_profiles = delay_profiles(cfr, n_idft)?;
    let values = delay_profiles.iter().map(|d| doppler_transform(d, m_dft)).collect::<Result<Vec<_>>>()?;
    Ok(DelayDopplerCube { delay_profiles, values, n_idft, m_dft })
}

/// Coherent combination across RF chains: `DD[i, j] = |sum_p v_p[i, j]|^2`.
pub fn dd_map(cube: &DelayDopplerCube) -> DMatrix<f64> {
    let mut sum = CMat::zeros(cube.n_idft, cube.m_dft);
    for v in &cube.values {
        sum += v;
    }
    sum.map(|c| c.norm_sqr())
}

/// Same map as [`dd_map`] computed from the delay profiles alone: the Doppler
/// DFT is linear, so the chains are summed before transforming.
pub fn combined_dd_map(delay_profiles: &[CMat], m_dft: usize) -> Result<DMatrix<f64>> {
    let first = delay_profiles.first().ok_or_else(|| Error::Dimension("no RF chains".into()))?;
    let mut sum = CMat::zeros(first.nrows(), first.ncols());
    for d in delay_profiles {
        sum += d;
    }
    Ok(doppler_transform(&sum, m_dft)?.map(|c| c.norm_sqr()))
}

/// Snapshot matrix for one detection: delay bins `i_l - w_r ..= i_l + w_r`
/// of every original symbol, stacked symbol by symbol. Windows touching the
/// delay-axis edges are shifted inward so the snapshot count stays
/// `(2 w_r + 1) M`.
pub fn gather_snapshots(delay_profiles: &[CMat], detection: &Detection, w_r: usize) -> Result<CMat> {
    let first = delay_profiles.first().ok_or_else(|| Error::Dimension("no RF chains".into()))?;
    let (n_idft, n_sym) = first.shape();
    let width = 2 * w_r + 1;
    if width > n_idft {
        return Err(Error::InvalidConfig(format!("window of {width} bins exceeds N_IDFT = {n_idft}")));
    }
    let start = (detection.delay_bin as i64 - w_r as i64).clamp(0, (n_idft - width) as i64) as usize;
    let mut y = CMat::zeros(delay_profiles.len(), width * n_sym);
    for m in 0..n_sym {
        for k in 0..width {
            for (p, d) in delay_profiles.iter().enumerate() {
                y[(p, m * width + k)] = d[(start + k, m)];
            }
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::build_ssb_grid;

    fn det(bin: usize) -> Detection {
        Detection { delay_bin: bin, doppler_bin: 0, doppler_bin_signed: 0, range: 0.0, velocity: 0.0, power: 1.0 }
    }

    #[test]
    fn payload_echo_gives_unit_cfr_on_mask() {
        let grid = build_ssb_grid(3);
        let rx = ReceivedGrid { chains: vec![grid.payload.clone()] };
        let cfr = ls_cfr(&rx, &grid).unwrap();
        for n in 0..240 {
            for m in 0..4 {
                let expected = if grid.is_occupied(n, m) { 1.0 } else { 0.0 };
                assert!((cfr.chains[0][(n, m)] - C64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let grid = build_ssb_grid(3);
        let rx = ReceivedGrid { chains: vec![CMat::zeros(100, 4)] };
        assert!(ls_cfr(&rx, &grid).is_err());
    }

    #[test]
    fn undersized_transforms_are_rejected() {
        let cfr = Cfr { chains: vec![CMat::zeros(240, 4)] };
        assert!(delay_doppler(&cfr, 128, 64).is_err());
        assert!(delay_doppler(&cfr, 256, 2).is_err());
        assert!(delay_doppler(&cfr, 256, 4).is_ok());
    }

    #[test]
    fn rectangular_band_peaks_at_delay_zero() {
        let cfr = Cfr { chains: vec![CMat::from_element(240, 1, C64::new(1.0, 0.0))] };
        let d = delay_profiles(&cfr, 256).unwrap();
        let mags: Vec<f64> = d[0].column(0).iter().map(|c| c.norm()).collect();
        let argmax = (0..256).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap();
        assert_eq!(argmax, 0);
        assert!((mags[0] - 240.0).abs() < 1e-9);
    }

    #[test]
    fn inverse_kernels_recover_zero_padded_cfr() {
        let grid = build_ssb_grid(8);
        let cfr = Cfr { chains: vec![grid.payload.clone()] };
        let cube = delay_doppler(&cfr, 256, 8).unwrap();
        let v = &cube.values[0];
        // invert: DFT along delay with exp(-j..)/N and IDFT along Doppler with exp(+j..)/M
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(256);
        let inv = planner.plan_fft_inverse(8);
        let mut back = v.clone();
        for i in 0..256 {
            let mut row: Vec<C64> = (0..8).map(|j| back[(i, j)]).collect();
            inv.process(&mut row);
            for j in 0..8 {
                back[(i, j)] = row[j] / 8.0;
            }
        }
        for j in 0..8 {
            let mut col: Vec<C64> = back.column(j).iter().cloned().collect();
            fwd.process(&mut col);
            for i in 0..256 {
                back[(i, j)] = col[i] / 256.0;
            }
        }
        for i in 0..256 {
            for j in 0..8 {
                let expected = if i < 240 && j < 4 { grid.payload[(i, j)] } else { C64::new(0.0, 0.0) };
                assert!((back[(i, j)] - expected).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn combination_gain_and_shortcut() {
        let grid = build_ssb_grid(4);
        let cfr = Cfr { chains: vec![grid.payload.clone(); 3] };
        let cube = delay_doppler(&cfr, 256, 16).unwrap();
        let single = dd_map(&DelayDopplerCube {
            delay_profiles: vec![cube.delay_profiles[0].clone()],
            values: vec![cube.values[0].clone()],
            n_idft: 256,
            m_dft: 16,
        });
        let combined = dd_map(&cube);
        for (c, s) in combined.iter().zip(single.iter()) {
            assert!((c - 9.0 * s).abs() <= 1e-9 * (1.0 + c.abs()));
        }
        let shortcut = combined_dd_map(&cube.delay_profiles, 16).unwrap();
        assert!((shortcut - combined).abs().max() < 1e-6);
    }

    #[test]
    fn snapshot_window_sizes_and_edges() {
        let d = vec![CMat::from_fn(256, 4, |i, m| C64::new(i as f64, m as f64)); 2];
        assert_eq!(gather_snapshots(&d, &det(30), 0).unwrap().ncols(), 4);
        let y = gather_snapshots(&d, &det(30), 2).unwrap();
        assert_eq!(y.shape(), (2, 20));
        assert_eq!(y[(0, 0)].re, 28.0);
        // left edge shifts inward
        let y = gather_snapshots(&d, &det(0), 2).unwrap();
        assert_eq!(y.ncols(), 20);
        assert_eq!(y[(0, 0)].re, 0.0);
        assert_eq!(y[(0, 4)].re, 4.0);
        let y = gather_snapshots(&d, &det(255), 2).unwrap();
        assert_eq!(y[(0, 4)].re, 255.0);
    }
}
