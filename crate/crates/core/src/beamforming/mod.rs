//! Uncertainty-aware multi-user transmit beamforming.
//!
//! Tracker beliefs become per-user channel correlation models; SDR-SCA
//! maximises the average sum-rate over relaxed covariances, Gaussian
//! randomisation recovers rank-1 digital beamformers and an alternating
//! minimisation fits a phase-shifter/digital cascade to them.

pub mod correlation;
pub mod hybrid;
pub mod pattern;
pub mod randomize;
pub mod sca;
pub mod sdp;

pub use correlation::{
    angle_correlation, attenuation_constant, average_sinr, average_sum_rate, gauss_hermite_normal, path_gain,
    sampled_sum_rate, CorrelationModel, UserPrior, QUADRATURE_NODES,
};
pub use hybrid::{hybrid_factorize, hybrid_factorize_from, BeamformerSet, HybridOutcome};
pub use pattern::{beam_gain, beam_pattern};
pub use randomize::{psd_factor, randomize_rank1, DEFAULT_DRAWS};
pub use sca::{min_power, relaxed_sum_rate, solve_convex_subproblem, solve_sca, ScaOptions, SdpSolution};
pub use sdp::BarrierOptions;

use serde::{Deserialize, Serialize};

use crate::radio::{RadioConfig, UpaConfig};
use crate::{CMat, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignOptions {
    /// Average over the prior spreads; otherwise design for the point
    /// estimates only.
    pub robust: bool,
    pub eps: f64,
    pub max_sca_iters: usize,
    pub n_draws: usize,
    pub hybrid_iters: usize,
    pub seed: u64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self { robust: true, eps: 1e-3, max_sca_iters: 50, n_draws: DEFAULT_DRAWS, hybrid_iters: 200, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct Design {
    /// Models the optimiser saw.
    pub models: Vec<CorrelationModel>,
    pub relaxed: SdpSolution,
    /// Fully digital `N x K` beamformer.
    pub digital: CMat,
    pub hybrid: BeamformerSet,
}

/// Full chain: correlation models, SDR-SCA, randomisation, hybrid fit.
pub fn design_beamformers(
    priors: &[UserPrior],
    cfg: &UpaConfig,
    radio: &RadioConfig,
    p_max: f64,
    opts: &DesignOptions,
) -> Result<Design> {
    let models = priors
        .iter()
        .map(|p| {
            let p = if opts.robust { *p } else { p.point_estimate() };
            CorrelationModel::from_prior(&p, cfg, radio)
        })
        .collect::<Result<Vec<_>>>()?;
    let gammas: Vec<f64> = priors.iter().map(|p| p.sinr_threshold).collect();
    let (relaxed, digital) = if models.len() == 1 {
        single_user(&models[0], p_max, gammas[0])?
    } else {
        let sca = ScaOptions { eps: opts.eps, max_iters: opts.max_sca_iters, ..ScaOptions::default() };
        let relaxed = solve_sca(&models, p_max, &gammas, &sca)?;
        let digital = randomize_rank1(&relaxed, &models, p_max, &gammas, opts.n_draws, opts.seed)?;
        (relaxed, digital)
    };
    let hybrid = hybrid_factorize(&digital, cfg.n_rf(), p_max, opts.hybrid_iters, opts.seed ^ 0x9e37_79b9)?.set;
    Ok(Design { models, relaxed, digital, hybrid })
}

/// One user: the relaxed optimum is rank one along the principal eigenvector
/// of the correlation, so no optimisation is needed.
fn single_user(model: &CorrelationModel, p_max: f64, gamma: f64) -> Result<(SdpSolution, CMat)> {
    let (values, vectors) = crate::linalg::eigh_desc(&model.angle);
    let lambda = values.first().copied().unwrap_or(0.0).max(0.0);
    if p_max * lambda < gamma * model.effective_noise {
        return Err(Error::Infeasible(format!("single-user SINR floor {gamma} above the matched-beam SINR")));
    }
    let w = vectors.column(0).scale(p_max.sqrt());
    let block = &w * w.adjoint();
    let signal = p_max * lambda;
    let relaxed = SdpSolution {
        objective: (1.0 + signal / model.effective_noise).log2(),
        blocks: vec![block],
        signal: vec![signal],
        interference: vec![model.effective_noise],
        surrogate_history: vec![],
        iterations: 0,
    };
    let digital = CMat::from_column_slice(w.len(), 1, w.as_slice());
    Ok((relaxed, digital))
}
