//! Uncertainty-averaged channel statistics and average-SINR metrics.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{hermitize, psd_project, quad_form};
use crate::radio::{steering_vector, RadioConfig, UpaConfig};
use crate::{CMat, Error, Result, C64};

/// Quadrature order per dimension.
pub const QUADRATURE_NODES: usize = 9;

/// Gauss-Hermite rule for a standard normal: `E f(Z) ~ sum w_i f(x_i)`,
/// weights summing to one (Golub-Welsch).
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Jacobi matrix of the probabilists' Hermite polynomials
    let jacobi = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { (i.max(j) as f64).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gaussian belief about one user's position, plus its link parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserPrior {
    pub range: f64,
    pub elevation: f64,
    pub azimuth: f64,
    pub sigma_range: f64,
    pub sigma_elevation: f64,
    pub sigma_azimuth: f64,
    /// Receiver noise power (W).
    pub noise_var: f64,
    /// Average-SINR floor (linear).
    pub sinr_threshold: f64,
}

impl UserPrior {
    /// Same nominal values with all spreads set to zero.
    pub fn point_estimate(&self) -> Self {
        Self { sigma_range: 0.0, sigma_elevation: 0.0, sigma_azimuth: 0.0, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range > 0.0) || !(self.noise_var > 0.0) || !(self.sinr_threshold >= 0.0) {
            return Err(Error::InvalidConfig("prior needs positive range and noise, non-negative SINR floor".into()));
        }
        if [self.sigma_range, self.sigma_elevation, self.sigma_azimuth].iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidConfig("prior spreads must be non-negative".into()));
        }
        Ok(())
    }
}

/// Free-space power gain `lambda^2 / (4 pi r)^2`.
pub fn path_gain(range: f64, radio: &RadioConfig) -> f64 {
    (radio.wavelength() / (4.0 * PI * range)).powi(2)
}

/// Expected path gain under `N(range, sigma_range^2)`.
pub fn attenuation_constant(prior: &UserPrior, radio: &RadioConfig) -> Result<f64> {
    if !(prior.range > 4.0 * prior.sigma_range) {
        return Err(Error::InvalidConfig(format!(
            "range {} m too close to its spread {} m",
            prior.range, prior.sigma_range
        )));
    }
    let (x, w) = gauss_hermite_normal(QUADRATURE_NODES);
    Ok(x.iter().zip(&w).map(|(xi, wi)| wi * path_gain(prior.range + prior.sigma_range * xi, radio)).sum())
}

/// `E[a a^H]` over independent Gaussian elevation and azimuth.
pub fn angle_correlation(prior: &UserPrior, cfg: &UpaConfig, radio: &RadioConfig) -> Result<CMat> {
    if prior.elevation.abs() + 3.0 * prior.sigma_elevation >= PI / 2.0 {
        return Err(Error::OutOfFieldOfView(format!(
            "elevation {} rad with spread {} reaches the array endfire",
            prior.elevation, prior.sigma_elevation
        )));
    }
    let n = cfg.n_elements();
    let (x, w) = gauss_hermite_normal(QUADRATURE_NODES);
    let el_nodes: Vec<(f64, f64)> = if prior.sigma_elevation > 0.0 {
        x.iter().zip(&w).map(|(xi, wi)| (prior.elevation + prior.sigma_elevation * xi, *wi)).collect()
    } else {
        vec![(prior.elevation, 1.0)]
    };
    let az_nodes: Vec<(f64, f64)> = if prior.sigma_azimuth > 0.0 {
        x.iter().zip(&w).map(|(xi, wi)| (prior.azimuth + prior.sigma_azimuth * xi, *wi)).collect()
    } else {
        vec![(prior.azimuth, 1.0)]
    };
    let mut r = CMat::zeros(n, n);
    for &(phi, wp) in &el_nodes {
        for &(theta, wt) in &az_nodes {
            let a = steering_vector(cfg, radio, phi, theta);
            r.gerc(C64::new(wp * wt, 0.0), &a, &a, C64::new(1.0, 0.0));
        }
    }
    if el_nodes.len() == 1 && az_nodes.len() == 1 {
        return Ok(hermitize(&r));
    }
    Ok(psd_project(&r))
}

/// Channel statistics of one user: `E[h h^H] = attenuation * angle`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationModel {
    pub attenuation: f64,
    pub angle: CMat,
    /// Receiver noise over the attenuation constant.
    pub effective_noise: f64,
}

impl CorrelationModel {
    pub fn from_prior(prior: &UserPrior, cfg: &UpaConfig, radio: &RadioConfig) -> Result<Self> {
        prior.validate()?;
        let attenuation = attenuation_constant(prior, radio)?;
        let angle = angle_correlation(prior, cfg, radio)?;
        Ok(Self { attenuation, angle, effective_noise: prior.noise_var / attenuation })
    }
}

/// Average SINR of user `k` for beamformer columns `w` (N x K).
pub fn average_sinr(w: &CMat, models: &[CorrelationModel], k: usize) -> f64 {
    let r = &models[k].angle;
    let signal = quad_form(r, &w.column(k).into_owned());
    let interference: f64 =
        (0..w.ncols()).filter(|&i| i != k).map(|i| quad_form(r, &w.column(i).into_owned())).sum();
    signal / (interference + models[k].effective_noise)
}

/// `sum_k log2(1 + average SINR_k)` (bit/s/Hz).
pub fn average_sum_rate(w: &CMat, models: &[CorrelationModel]) -> f64 {
    (0..models.len()).map(|k| (1.0 + average_sinr(w, models, k)).log2()).sum()
}

/// Mean over `samples` draws of the true position from the priors of
/// `sum_k log2(1 + SINR_k)` on the resulting line-of-sight channels.
pub fn sampled_sum_rate<R: Rng + ?Sized>(
    w: &CMat,
    priors: &[UserPrior],
    cfg: &UpaConfig,
    radio: &RadioConfig,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let mut total = 0.0;
    for _ in 0..samples {
        let gains: Vec<Vec<f64>> = priors
            .iter()
            .map(|p| {
                let r = (p.range + p.sigma_range * rng.sample::<f64, _>(StandardNormal)).max(1e-3);
                let phi = p.elevation + p.sigma_elevation * rng.sample::<f64, _>(StandardNormal);
                let theta = p.azimuth + p.sigma_azimuth * rng.sample::<f64, _>(StandardNormal);
                let h = steering_vector(cfg, radio, phi, theta).scale(path_gain(r, radio).sqrt());
                w.column_iter().map(|wj| h.dotc(&wj).norm_sqr()).collect()
            })
            .collect();
        for (k, g) in gains.iter().enumerate() {
            let interference: f64 = g.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| v).sum();
            total += (1.0 + g[k] / (interference + priors[k].noise_var)).log2();
        }
    }
    total / samples.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadrature_integrates_moments() {
        let (x, w) = gauss_hermite_normal(9);
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let m = |p: i32| x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(p)).sum::<f64>();
        assert_relative_eq!(m(2), 1.0, epsilon = 1e-10);
        assert_relative_eq!(m(4), 3.0, epsilon = 1e-10);
        assert_relative_eq!(m(16), 2027025.0, max_relative = 1e-9);
        assert!(m(3).abs() < 1e-10);
    }

    #[test]
    fn attenuation_limits_and_monotonicity() {
        let radio = RadioConfig::fr2_default();
        let mut p = UserPrior {
            range: 100.0,
            elevation: 0.1,
            azimuth: 0.2,
            sigma_range: 0.0,
            sigma_elevation: 0.0,
            sigma_azimuth: 0.0,
            noise_var: 1e-12,
            sinr_threshold: 1.0,
        };
        assert_relative_eq!(attenuation_constant(&p, &radio).unwrap(), path_gain(100.0, &radio), max_relative = 1e-12);
        p.sigma_range = 3.3;
        let c100 = attenuation_constant(&p, &radio).unwrap();
        assert!(c100 > path_gain(100.0, &radio));
        p.range = 120.0;
        assert!(attenuation_constant(&p, &radio).unwrap() < c100);
        p.range = 10.0;
        assert!(attenuation_constant(&p, &radio).is_err());
    }

    #[test]
    fn angle_correlation_limits() {
        let radio = RadioConfig::fr2_default();
        let cfg = UpaConfig::half_wavelength(8, 4, 4, 2, &radio).unwrap();
        let mut p = UserPrior {
            range: 100.0,
            elevation: 0.2,
            azimuth: -0.5,
            sigma_range: 0.0,
            sigma_elevation: 0.0,
            sigma_azimuth: 0.0,
            noise_var: 1e-12,
            sinr_threshold: 1.0,
        };
        let a = steering_vector(&cfg, &radio, 0.2, -0.5);
        let r0 = angle_correlation(&p, &cfg, &radio).unwrap();
        assert!((&r0 - &a * a.adjoint()).norm() < 1e-10);
        p.sigma_elevation = 0.04;
        p.sigma_azimuth = 0.03;
        let r = angle_correlation(&p, &cfg, &radio).unwrap();
        for i in 0..32 {
            assert!((r[(i, i)].re - 1.0).abs() < 1e-9 && r[(i, i)].im.abs() < 1e-12);
        }
        assert!((r.trace().re - 32.0).abs() < 1e-6);
        p.elevation = 1.5;
        assert!(angle_correlation(&p, &cfg, &radio).is_err());
    }

    #[test]
    fn matched_single_user_sinr() {
        let radio = RadioConfig::fr2_default();
        let cfg = UpaConfig::half_wavelength(8, 4, 4, 2, &radio).unwrap();
        let a = steering_vector(&cfg, &radio, 0.3, 0.4);
        let model = CorrelationModel { attenuation: 1.0, angle: &a * a.adjoint(), effective_noise: 0.5 };
        let p: f64 = 2.0;
        let w = CMat::from_column_slice(32, 1, a.scale(p.sqrt() / a.norm()).as_slice());
        assert_relative_eq!(average_sinr(&w, &[model.clone()], 0), p * 32.0 / 0.5, max_relative = 1e-12);
        assert_eq!(average_sinr(&CMat::zeros(32, 1), &[model], 0), 0.0);
    }

    #[test]
    fn sampled_rate_without_spread_is_deterministic() {
        use rand::SeedableRng;
        let radio = RadioConfig::fr2_default();
        let cfg = UpaConfig::half_wavelength(4, 2, 2, 1, &radio).unwrap();
        let prior = |az: f64| UserPrior {
            range: 60.0,
            elevation: 0.2,
            azimuth: az,
            sigma_range: 0.0,
            sigma_elevation: 0.0,
            sigma_azimuth: 0.0,
            noise_var: 1e-12,
            sinr_threshold: 1.0,
        };
        let priors = [prior(-0.5), prior(0.4)];
        let models: Vec<_> = priors.iter().map(|p| CorrelationModel::from_prior(p, &cfg, &radio).unwrap()).collect();
        let w = CMat::from_fn(8, 2, |i, j| C64::from_polar(0.03, (i * (j + 1)) as f64));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let sampled = sampled_sum_rate(&w, &priors, &cfg, &radio, 5, &mut rng);
        assert_relative_eq!(sampled, average_sum_rate(&w, &models), max_relative = 1e-10);
    }
}
