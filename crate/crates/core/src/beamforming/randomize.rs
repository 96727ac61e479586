//! Gaussian randomisation from relaxed covariances to rank-1 beamformers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::beamforming::correlation::{average_sinr, average_sum_rate, CorrelationModel};
use crate::beamforming::sca::SdpSolution;
use crate::linalg::{complex_gaussian, eigh_desc};
use crate::{CMat, Error, Result};

/// Default number of random candidate sets.
pub const DEFAULT_DRAWS: usize = 500;

/// Relative slack on SINR floors when screening candidates.
const FLOOR_SLACK: f64 = 1e-6;

/// `U diag(sqrt(max(s, 0)))` of a Hermitian PSD matrix, so `F F^H = W`.
pub fn psd_factor(w: &CMat) -> CMat {
    let (values, mut vectors) = eigh_desc(w);
    for (i, v) in values.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        vectors.column_mut(i).iter_mut().for_each(|c| *c *= s);
    }
    vectors
}

fn scale_to_power(w: &mut CMat, p_max: f64) -> bool {
    let power = w.norm_squared();
    if !(power > 0.0) {
        return p_max == 0.0;
    }
    w.scale_mut((p_max / power).sqrt());
    true
}

fn feasible(w: &CMat, models: &[CorrelationModel], gammas: &[f64]) -> bool {
    (0..models.len()).all(|k| average_sinr(w, models, k) >= gammas[k] * (1.0 - FLOOR_SLACK))
}

/// Draws `n_draws` candidate column sets `w_k = F_k z_k`, `z_k ~ CN(0, I)`,
/// plus the principal-eigenvector set, rescales each to total power `p_max`
/// and returns the feasible set with the highest average sum-rate (N x K).
pub fn randomize_rank1(
    sol: &SdpSolution,
    models: &[CorrelationModel],
    p_max: f64,
    gammas: &[f64],
    n_draws: usize,
    seed: u64,
) -> Result<CMat> {
    let k = models.len();
    if sol.blocks.len() != k || gammas.len() != k {
        return Err(Error::Dimension(format!("{} blocks, {} users, {} floors", sol.blocks.len(), k, gammas.len())));
    }
    let n = sol.blocks.first().map_or(0, |w| w.nrows());
    let factors: Vec<CMat> = sol.blocks.iter().map(psd_factor).collect();

    let mut best: Option<(f64, CMat)> = None;
    let mut consider = |mut w: CMat| {
        if !scale_to_power(&mut w, p_max) || !feasible(&w, models, gammas) {
            return;
        }
        let rate = average_sum_rate(&w, models);
        if best.as_ref().is_none_or(|(r, _)| rate > *r) {
            best = Some((rate, w));
        }
    };

    let mut principal = CMat::zeros(n, k);
    for (j, f) in factors.iter().enumerate() {
        principal.set_column(j, &f.column(0));
    }
    consider(principal);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_draws {
        let mut w = CMat::zeros(n, k);
        for (j, f) in factors.iter().enumerate() {
            let z = complex_gaussian(&mut rng, n, 1.0);
            w.set_column(j, &(f * z));
        }
        consider(w);
    }
    best.map(|(_, w)| w).ok_or(Error::NoFeasibleDraw)
}
