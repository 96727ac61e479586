//! Sum-rate maximisation over relaxed beamformer covariances by successive
//! convex approximation.
//!
//! Every subproblem replaces `-log2(b_k)` (interference plus noise) by its
//! tangent at the previous iterate, keeping the constants so the surrogate
//! touches the true average sum-rate there.

use std::f64::consts::LN_2;

use crate::beamforming::correlation::CorrelationModel;
use crate::beamforming::sdp::{BarrierOptions, ConcaveSdp, Term};
use crate::linalg::{eigh_desc, trace_product};
use crate::{CMat, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    /// Stop once the surrogate optimum moves by at most this much (bit/s/Hz).
    pub eps: f64,
    pub max_iters: usize,
    pub barrier: BarrierOptions,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self { eps: 1e-3, max_iters: 50, barrier: BarrierOptions::default() }
    }
}

/// Relaxed (covariance) beamformer solution.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub blocks: Vec<CMat>,
    /// Average sum-rate of `blocks` (bit/s/Hz).
    pub objective: f64,
    /// `a_k = tr(R_k W_k)`
    pub signal: Vec<f64>,
    /// `b_k = sum_{j != k} tr(R_k W_j) + sigma_eff_k^2`
    pub interference: Vec<f64>,
    /// Surrogate optimum per SCA iteration.
    pub surrogate_history: Vec<f64>,
    pub iterations: usize,
}

/// `(a_k, b_k)` of relaxed beamformers.
pub fn signal_and_interference(blocks: &[CMat], models: &[CorrelationModel]) -> (Vec<f64>, Vec<f64>) {
    let k = models.len();
    let mut a = vec![0.0; k];
    let mut b = vec![0.0; k];
    for (u, m) in models.iter().enumerate() {
        b[u] = m.effective_noise;
        for (j, w) in blocks.iter().enumerate() {
            let v = trace_product(&m.angle, w);
            if j == u {
                a[u] = v;
            } else {
                b[u] += v;
            }
        }
    }
    (a, b)
}

/// Average sum-rate of relaxed beamformers.
pub fn relaxed_sum_rate(blocks: &[CMat], models: &[CorrelationModel]) -> f64 {
    let (a, b) = signal_and_interference(blocks, models);
    a.iter().zip(&b).map(|(a, b)| (1.0 + a / b).log2()).sum()
}

/// Surrogate around interference levels `b_ref`, evaluated at `blocks`.
pub fn surrogate_value(blocks: &[CMat], models: &[CorrelationModel], b_ref: &[f64]) -> f64 {
    let (a, b) = signal_and_interference(blocks, models);
    (0..models.len())
        .map(|k| (a[k] + b[k]).log2() - b_ref[k].log2() - (b[k] - b_ref[k]) / (b_ref[k] * LN_2))
        .sum()
}

fn check_inputs(models: &[CorrelationModel], p_max: f64, gammas: &[f64]) -> Result<usize> {
    let k = models.len();
    if k == 0 || gammas.len() != k {
        return Err(Error::Dimension(format!("{} users with {} SINR thresholds", k, gammas.len())));
    }
    let n = models[0].angle.nrows();
    if models.iter().any(|m| m.angle.shape() != (n, n) || !(m.effective_noise > 0.0)) {
        return Err(Error::Dimension("correlation matrices must share one size and have positive noise".into()));
    }
    if !(p_max >= 0.0) || gammas.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::InvalidConfig("power budget and SINR thresholds must be non-negative".into()));
    }
    Ok(n)
}

fn lambda_max(m: &CMat) -> f64 {
    eigh_desc(m).0.first().copied().unwrap_or(0.0).max(0.0)
}

/// Problem data in power-normalised units (`W = p_max * W~`, `tr W~ <= 1`).
struct Normalised<'a> {
    models: &'a [CorrelationModel],
    gammas: &'a [f64],
    p: f64,
    n: usize,
    k: usize,
}

impl Normalised<'_> {
    fn base(&self) -> ConcaveSdp {
        let mut matrices: Vec<CMat> = self.models.iter().map(|m| m.angle.clone()).collect();
        matrices.push(CMat::identity(self.n, self.n));
        ConcaveSdp { block_dims: vec![self.n; self.k], matrices, linear: vec![], logs: vec![], constraints: vec![] }
    }

    fn identity(&self) -> usize {
        self.k
    }

    /// Active SINR constraints, divided by `sigma_k^2`.
    fn sinr_constraints(&self, sdp: &mut ConcaveSdp) {
        for (u, m) in self.models.iter().enumerate() {
            let g = self.gammas[u];
            if g <= 0.0 {
                continue;
            }
            let s = self.p / m.effective_noise;
            let op = (0..self.k)
                .map(|j| Term { block: j, matrix: u, scale: if j == u { -s } else { g * s } })
                .collect();
            sdp.constraints.push((op, -g));
        }
    }

    fn denormalise(&self, blocks: Vec<CMat>) -> Vec<CMat> {
        blocks.into_iter().map(|w| w.scale(self.p)).collect()
    }

    /// Dual start making every `Z_j` comfortably positive definite, given
    /// that the last constraint is the trace budget.
    fn start(&self, sdp: &ConcaveSdp, nu: f64, lam: f64) -> Vec<f64> {
        let mut x = vec![nu; sdp.logs.len()];
        x.extend(std::iter::repeat(lam).take(sdp.constraints.len()));
        let last = x.len() - 1;
        x[last] = 0.0;
        let worst = sdp.z_blocks(&x).iter().map(|z| -lambda_max(&z.scale(-1.0))).fold(f64::INFINITY, f64::min);
        x[last] = (-worst).max(0.0) * 2.0 + 1.0;
        x
    }
}

/// Minimum total power meeting all average-SINR floors, or `None` when no
/// floor is active. Fails with `Infeasible` once the minimum provably exceeds
/// `p_max`.
pub fn min_power(models: &[CorrelationModel], p_max: f64, gammas: &[f64], opts: &BarrierOptions) -> Result<Option<(Vec<CMat>, f64)>> {
    let n = check_inputs(models, p_max, gammas)?;
    if gammas.iter().all(|g| *g == 0.0) {
        return Ok(None);
    }
    if p_max == 0.0 {
        return Err(Error::Infeasible("positive SINR floors with zero power".into()));
    }
    let norm = Normalised { models, gammas, p: p_max, n, k: models.len() };
    let mut sdp = norm.base();
    sdp.linear = (0..norm.k).map(|j| Term { block: j, matrix: norm.identity(), scale: -1.0 }).collect();
    norm.sinr_constraints(&mut sdp);
    // Z_j = I + sum lam_i A_ij stays >= I/2 for small lam
    let spread: f64 = sdp
        .constraints
        .iter()
        .map(|(op, _)| op.iter().map(|t| t.scale.abs() * lambda_max(&sdp.matrices[t.matrix])).sum::<f64>())
        .sum();
    let x0 = vec![0.5 / spread.max(1e-300); sdp.constraints.len()];
    let opts = BarrierOptions { stop_below: Some(-1.0 - 1e-9), ..*opts };
    let out = sdp.solve(&x0, &opts)?;
    let power = -out.primal * p_max;
    Ok(Some((norm.denormalise(out.blocks), power)))
}

/// One SCA step: maximise the surrogate built at interference levels
/// `b_fixed` subject to the SINR floors and the power budget.
pub fn solve_convex_subproblem(
    models: &[CorrelationModel],
    b_fixed: &[f64],
    p_max: f64,
    gammas: &[f64],
    opts: &BarrierOptions,
) -> Result<SdpSolution> {
    let n = check_inputs(models, p_max, gammas)?;
    let k = models.len();
    if b_fixed.len() != k || b_fixed.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::InvalidConfig("linearisation points must be positive, one per user".into()));
    }
    if p_max == 0.0 {
        if gammas.iter().any(|g| *g > 0.0) {
            return Err(Error::Infeasible("positive SINR floors with zero power".into()));
        }
        return Ok(finish(vec![CMat::zeros(n, n); k], models, b_fixed, 0));
    }
    let norm = Normalised { models, gammas, p: p_max, n, k };
    let mut sdp = norm.base();
    for (u, m) in models.iter().enumerate() {
        let s = p_max / m.effective_noise;
        sdp.logs.push(((0..k).map(|j| Term { block: j, matrix: u, scale: s }).collect(), 1.0));
        for j in 0..k {
            if j != u {
                sdp.linear.push(Term { block: j, matrix: u, scale: -p_max / b_fixed[u] });
            }
        }
    }
    norm.sinr_constraints(&mut sdp);
    sdp.constraints.push(((0..k).map(|j| Term { block: j, matrix: norm.identity(), scale: 1.0 }).collect(), 1.0));
    let x0 = norm.start(&sdp, 1.0, 1e-3);
    let out = sdp.solve(&x0, opts)?;
    let mut blocks = norm.denormalise(out.blocks);
    // absorb the barrier's residual slack; scaling up keeps every SINR floor,
    // so the budget is filled whenever that raises the surrogate
    let power: f64 = blocks.iter().map(|w| w.trace().re).sum();
    if power > p_max {
        let s = p_max / power;
        blocks.iter_mut().for_each(|w| *w = w.scale(s));
    } else if power > 0.0 {
        let full: Vec<CMat> = blocks.iter().map(|w| w.scale(p_max / power)).collect();
        if surrogate_value(&full, models, b_fixed) > surrogate_value(&blocks, models, b_fixed) {
            blocks = full;
        }
    }
    Ok(finish(blocks, models, b_fixed, out.newton_steps))
}

fn finish(blocks: Vec<CMat>, models: &[CorrelationModel], b_ref: &[f64], _steps: usize) -> SdpSolution {
    let (signal, interference) = signal_and_interference(&blocks, models);
    let surrogate = surrogate_value(&blocks, models, b_ref);
    SdpSolution {
        objective: relaxed_sum_rate(&blocks, models),
        blocks,
        signal,
        interference,
        surrogate_history: vec![surrogate],
        iterations: 1,
    }
}

fn meets_floors(blocks: &[CMat], models: &[CorrelationModel], gammas: &[f64]) -> bool {
    let (a, b) = signal_and_interference(blocks, models);
    (0..models.len()).all(|k| a[k] >= gammas[k] * b[k])
}

/// SDR-SCA: iterates [`solve_convex_subproblem`] from a feasible start until
/// the surrogate optimum settles.
pub fn solve_sca(models: &[CorrelationModel], p_max: f64, gammas: &[f64], opts: &ScaOptions) -> Result<SdpSolution> {
    let n = check_inputs(models, p_max, gammas)?;
    let k = models.len();
    let floor = min_power(models, p_max, gammas, &opts.barrier)?;
    if p_max == 0.0 {
        return Ok(finish(vec![CMat::zeros(n, n); k], models, &vec![1.0; k], 0));
    }
    let mut blocks: Vec<CMat> =
        models.iter().map(|m| m.angle.scale(p_max / k as f64 / m.angle.trace().re.max(f64::MIN_POSITIVE))).collect();
    if !meets_floors(&blocks, models, gammas) {
        let (w_min, p_min) = floor.ok_or_else(|| Error::Infeasible("no feasible start".into()))?;
        // scaling every covariance up only raises each SINR
        let s = if p_min > 0.0 { p_max / p_min } else { 1.0 };
        blocks = w_min.into_iter().map(|w| w.scale(s)).collect();
    }
    let mut history = Vec::new();
    for iter in 1..=opts.max_iters {
        let (_, b_ref) = signal_and_interference(&blocks, models);
        let sol = solve_convex_subproblem(models, &b_ref, p_max, gammas, &opts.barrier)?;
        let value = sol.surrogate_history[0];
        let settled = history.last().is_some_and(|prev: &f64| (value - prev).abs() <= opts.eps);
        history.push(value);
        blocks = sol.blocks;
        if settled {
            let (signal, interference) = signal_and_interference(&blocks, models);
            return Ok(SdpSolution {
                objective: relaxed_sum_rate(&blocks, models),
                blocks,
                signal,
                interference,
                surrogate_history: history,
                iterations: iter,
            });
        }
    }
    Err(Error::MaxIters { iterations: opts.max_iters })
}
