//! Hybrid analog/digital factorisation `W* ~ W_rf W_bb` with a
//! constant-modulus analog stage.

use nalgebra::linalg::SVD;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

use crate::{CMat, Error, Result, C64};

/// Ridge weight of the digital least-squares step.
pub const LS_REGULARIZATION: f64 = 1e-8;

/// Analog (phase-shifter) and digital stages; columns of the product are the
/// per-user beamformers.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    /// `N x N_rf`, every entry of modulus `1/sqrt(N)`.
    pub rf: CMat,
    /// `N_rf x K`.
    pub bb: CMat,
}

impl BeamformerSet {
    pub fn combined(&self) -> CMat {
        &self.rf * &self.bb
    }

    pub fn power(&self) -> f64 {
        self.combined().norm_squared()
    }
}

#[derive(Debug, Clone)]
pub struct HybridOutcome {
    pub set: BeamformerSet,
    /// `||W* - W_rf W_bb||_F` of the best iterate, before power scaling.
    pub residual: f64,
    /// Residual after every sweep, starting with the initial point.
    pub history: Vec<f64>,
}

/// Elementwise projection onto modulus `1/sqrt(N)`; zero entries get phase 0.
pub fn project_constant_modulus(m: &CMat) -> CMat {
    let modulus = 1.0 / (m.nrows() as f64).sqrt();
    m.map(|c| if c.norm() > 0.0 { c * (modulus / c.norm()) } else { C64::new(modulus, 0.0) })
}

fn digital_ls(rf: &CMat, target: &CMat) -> CMat {
    let n_rf = rf.ncols();
    let gram = rf.adjoint() * rf + CMat::identity(n_rf, n_rf).scale(LS_REGULARIZATION);
    let rhs = rf.adjoint() * target;
    gram.cholesky().map(|c| c.solve(&rhs)).unwrap_or_else(|| CMat::zeros(n_rf, target.ncols()))
}

fn spectral_norm(m: &CMat) -> f64 {
    SVD::new(m.clone(), false, false).singular_values.iter().copied().fold(0.0, f64::max)
}

/// Alternating minimisation from a given analog stage.
pub fn hybrid_factorize_from(w_star: &CMat, rf0: CMat, p_max: f64, iters: usize) -> Result<HybridOutcome> {
    let (n, k) = w_star.shape();
    if rf0.nrows() != n || rf0.ncols() < k {
        return Err(Error::Dimension(format!("analog stage {:?} for target {:?} needs N_rf >= K", rf0.shape(), (n, k))));
    }
    let mut rf = project_constant_modulus(&rf0);
    let mut bb = digital_ls(&rf, w_star);
    let mut residual = (w_star - &rf * &bb).norm();
    let mut history = vec![residual];
    let mut best = (residual, rf.clone(), bb.clone());
    for _ in 0..iters {
        let lipschitz = spectral_norm(&(&bb * bb.adjoint()));
        if !(lipschitz > 0.0) {
            break;
        }
        let step = (w_star - &rf * &bb) * bb.adjoint();
        rf = project_constant_modulus(&(&rf + step.scale(1.0 / lipschitz)));
        bb = digital_ls(&rf, w_star);
        residual = (w_star - &rf * &bb).norm();
        history.push(residual);
        if residual < best.0 {
            best = (residual, rf.clone(), bb.clone());
        }
    }
    let (residual, rf, mut bb) = best;
    let power = (&rf * &bb).norm_squared();
    if power > 0.0 {
        bb.scale_mut((p_max / power).sqrt());
    }
    Ok(HybridOutcome { set: BeamformerSet { rf, bb }, residual, history })
}

/// Alternating minimisation started from the phases of `W*`, with extra RF
/// chains initialised to seeded random phases. The result carries total
/// power exactly `p_max`.
pub fn hybrid_factorize(w_star: &CMat, n_rf: usize, p_max: f64, iters: usize, seed: u64) -> Result<HybridOutcome> {
    let (n, k) = w_star.shape();
    if n_rf < k {
        return Err(Error::Dimension(format!("{n_rf} RF chains cannot serve {k} users")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rf0 = CMat::from_fn(n, n_rf, |i, j| {
        if j < k {
            w_star[(i, j)]
        } else {
            C64::from_polar(1.0, rng.random::<f64>() * TAU)
        }
    });
    hybrid_factorize_from(w_star, rf0, p_max, iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complex_gaussian;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        let v = complex_gaussian(rng, r * c, 1.0);
        CMat::from_column_slice(r, c, v.as_slice())
    }

    #[test]
    fn exact_factorisation_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rf = project_constant_modulus(&random(&mut rng, 16, 4));
        let bb = random(&mut rng, 4, 3);
        let w = &rf * &bb;
        let p = w.norm_squared();
        let out = hybrid_factorize_from(&w, rf, p, 20).unwrap();
        assert!(out.residual < 1e-6, "{}", out.residual);
        assert!((out.set.combined() - &w).norm() < 1e-6);
    }

    #[test]
    fn constant_modulus_and_exact_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random(&mut rng, 32, 3);
        let out = hybrid_factorize(&w, 8, 2.0, 50, 1).unwrap();
        let m = 1.0 / 32f64.sqrt();
        assert!(out.set.rf.iter().all(|c| (c.norm() - m).abs() < 1e-12));
        assert!((out.set.power() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn residual_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = random(&mut rng, 32, 3);
        let out = hybrid_factorize(&w, 4, 1.0, 100, 2).unwrap();
        for pair in out.history.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-9), "{pair:?}");
        }
    }

    #[test]
    fn twice_the_users_in_chains_fits_well() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = random(&mut rng, 32, 3);
        let out = hybrid_factorize(&w, 8, 1.0, 200, 4).unwrap();
        assert!(out.residual / w.norm() <= 0.05, "{}", out.residual / w.norm());
    }

    #[test]
    fn too_few_chains_rejected() {
        let w = CMat::zeros(8, 3);
        assert!(hybrid_factorize(&w, 2, 1.0, 10, 0).is_err());
    }
}
