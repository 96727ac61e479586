//! Peak picking on the delay-Doppler map.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::radio::{RadioConfig, SSB_SYMBOLS};

/// Bin-to-physical conversion for a delay-Doppler map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdAxes {
    pub n_idft: usize,
    pub m_dft: usize,
    /// Range per delay bin (m).
    pub range_bin: f64,
    /// Radial velocity per Doppler bin (m/s).
    pub velocity_bin: f64,
    /// Doppler bins per resolution cell of the 4-symbol SSB.
    pub doppler_cell: usize,
}

impl DdAxes {
    pub fn new(radio: &RadioConfig, n_idft: usize, m_dft: usize) -> Self {
        let c = radio.speed_of_light;
        Self {
            n_idft,
            m_dft,
            range_bin: c / (2.0 * n_idft as f64 * radio.subcarrier_spacing_hz),
            velocity_bin: c / (2.0 * radio.carrier_hz * m_dft as f64 * radio.symbol_duration_s),
            doppler_cell: (m_dft / SSB_SYMBOLS).max(1),
        }
    }

    /// Two-sided Doppler index: bins above `m_dft / 2` are negative.
    pub fn signed_doppler(&self, j: usize) -> i64 {
        if j > self.m_dft / 2 {
            j as i64 - self.m_dft as i64
        } else {
            j as i64
        }
    }

    pub fn range(&self, delay_bin: usize) -> f64 {
        delay_bin as f64 * self.range_bin
    }

    pub fn velocity(&self, doppler_bin: usize) -> f64 {
        self.signed_doppler(doppler_bin) as f64 * self.velocity_bin
    }
}

/// One delay-Doppler peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub delay_bin: usize,
    pub doppler_bin: usize,
    pub doppler_bin_signed: i64,
    pub range: f64,
    pub velocity: f64,
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Threshold above the map median (dB).
    pub threshold_db: f64,
    pub max_targets: usize,
    /// Delay half-width (bins, circular) of the range-sidelobe guard.
    pub sidelobe_guard_bins: usize,
    /// Candidates inside the guard this far below an accepted peak (dB) are
    /// treated as its sidelobes.
    pub sidelobe_margin_db: f64,
    /// Nothing more than this far below the map maximum (dB) is detected.
    /// The partially occupied SSB symbols leave a delay sidelobe floor about
    /// 20 dB under a strong echo along the whole delay axis.
    pub dynamic_range_db: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { threshold_db: 13.0, max_targets: 8, sidelobe_guard_bins: 8, sidelobe_margin_db: 6.0, dynamic_range_db: 20.0 }
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

fn circular_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b) % n;
    d.min(n - d)
}

/// Strongest-first local maxima of `dd` (3x3 circular neighbourhood) above
/// `threshold_db` over the map median and within `dynamic_range_db` of the
/// map maximum. A peak within one delay bin and one
/// Doppler resolution cell of a stronger one is the same target.
pub fn detect_peaks(dd: &DMatrix<f64>, axes: &DdAxes, cfg: &DetectorConfig) -> Vec<Detection> {
    let (rows, cols) = dd.shape();
    if rows == 0 || cols == 0 || cfg.max_targets == 0 {
        return Vec::new();
    }
    let floor = 10f64.powf(cfg.threshold_db / 10.0) * median(dd.as_slice());
    let threshold = floor.max(10f64.powf(-cfg.dynamic_range_db / 10.0) * dd.max());
    let mut candidates = Vec::new();
    for j in 0..cols {
        for i in 0..rows {
            let v = dd[(i, j)];
            if !(v > threshold) {
                continue;
            }
            let mut is_max = true;
            'nb: for di in [rows - 1, 0, 1] {
                for dj in [cols - 1, 0, 1] {
                    if (di, dj) != (0, 0) && dd[((i + di) % rows, (j + dj) % cols)] > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                candidates.push((i, j, v));
            }
        }
    }
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    let margin = 10f64.powf(-cfg.sidelobe_margin_db / 10.0);
    let mut out: Vec<Detection> = Vec::new();
    for (i, j, v) in candidates {
        if out.len() == cfg.max_targets {
            break;
        }
        let suppressed = out.iter().any(|d| {
            let di = circular_distance(d.delay_bin, i, rows);
            let dj = circular_distance(d.doppler_bin, j, cols);
            (di <= 1 && dj <= axes.doppler_cell.saturating_sub(1).max(1)) || (di <= cfg.sidelobe_guard_bins && v < d.power * margin)
        });
        if suppressed {
            continue;
        }
        out.push(Detection {
            delay_bin: i,
            doppler_bin: j,
            doppler_bin_signed: axes.signed_doppler(j),
            range: axes.range(i),
            velocity: axes.velocity(j),
            power: v,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes() -> DdAxes {
        DdAxes::new(&RadioConfig::fr2_default(), 64, 16)
    }

    #[test]
    fn zero_map_has_no_detections() {
        let dd = DMatrix::zeros(64, 16);
        assert!(detect_peaks(&dd, &axes(), &DetectorConfig::default()).is_empty());
    }

    #[test]
    fn single_injected_peak() {
        let mut dd = DMatrix::from_fn(64, 16, |i, j| 1.0 + 0.1 * (((i * 7 + j * 13) % 5) as f64));
        dd[(20, 3)] = 1000.0;
        let det = detect_peaks(&dd, &axes(), &DetectorConfig::default());
        assert_eq!(det.len(), 1);
        assert_eq!((det[0].delay_bin, det[0].doppler_bin), (20, 3));
    }

    #[test]
    fn adjacent_peaks_merge() {
        let mut dd = DMatrix::from_element(64, 16, 1.0);
        dd[(20, 3)] = 1000.0;
        dd[(21, 4)] = 900.0;
        let det = detect_peaks(&dd, &axes(), &DetectorConfig::default());
        assert_eq!(det.len(), 1);
        assert_eq!(det[0].delay_bin, 20);
    }

    #[test]
    fn weak_peaks_below_dynamic_range_are_dropped() {
        let mut dd = DMatrix::from_element(64, 16, 1.0);
        dd[(10, 2)] = 1e5;
        dd[(40, 8)] = 2e3;
        dd[(50, 8)] = 5e2;
        let det = detect_peaks(&dd, &axes(), &DetectorConfig::default());
        let bins: Vec<usize> = det.iter().map(|d| d.delay_bin).collect();
        assert_eq!(bins, vec![10, 40]);
    }

    #[test]
    fn separated_peaks_strongest_first_and_capped() {
        let mut dd = DMatrix::from_element(64, 16, 1.0);
        dd[(10, 2)] = 200.0;
        dd[(40, 8)] = 500.0;
        dd[(55, 12)] = 300.0;
        let det = detect_peaks(&dd, &axes(), &DetectorConfig::default());
        let bins: Vec<usize> = det.iter().map(|d| d.delay_bin).collect();
        assert_eq!(bins, vec![40, 55, 10]);
        let cfg = DetectorConfig { max_targets: 2, ..Default::default() };
        assert_eq!(detect_peaks(&dd, &axes(), &cfg).len(), 2);
    }

    #[test]
    fn weak_peak_near_strong_one_is_a_sidelobe() {
        let mut dd = DMatrix::from_element(64, 16, 1.0);
        dd[(20, 3)] = 1e5;
        dd[(25, 3)] = 5e3;
        dd[(45, 3)] = 5e3;
        let det = detect_peaks(&dd, &axes(), &DetectorConfig::default());
        let bins: Vec<usize> = det.iter().map(|d| d.delay_bin).collect();
        assert_eq!(bins, vec![20, 45]);
    }

    #[test]
    fn peaks_inside_one_doppler_cell_merge() {
        let mut dd = DMatrix::from_element(64, 16, 1.0);
        dd[(20, 3)] = 1000.0;
        dd[(21, 6)] = 990.0;
        dd[(30, 6)] = 990.0;
        let det = detect_peaks(&dd, &axes(), &DetectorConfig::default());
        let bins: Vec<usize> = det.iter().map(|d| d.delay_bin).collect();
        assert_eq!(bins, vec![20, 30]);
        dd[(21, 7)] = 990.0;
        dd[(21, 6)] = 1.0;
        assert_eq!(detect_peaks(&dd, &axes(), &DetectorConfig::default()).len(), 3);
    }

    #[test]
    fn signed_doppler_and_units() {
        let a = DdAxes::new(&RadioConfig::fr2_default(), 256, 256);
        assert_eq!(a.signed_doppler(128), 128);
        assert_eq!(a.signed_doppler(129), -127);
        assert_eq!(a.signed_doppler(255), -1);
        assert!((a.range_bin - 3e8 / (2.0 * 256.0 * 120e3)).abs() < 1e-12);
        assert!((a.velocity_bin - 3e8 / (2.0 * 28e9 * 256.0 * 8.9e-6)).abs() < 1e-12);
        assert!(a.velocity(255) < 0.0);
    }
}
