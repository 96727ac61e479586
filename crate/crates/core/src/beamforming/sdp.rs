//! Small block-diagonal SDPs with a concave log objective, solved by a
//! barrier method on the dual.
//!
//! Primal, over Hermitian PSD blocks `W_j`:
//!
//! ```text
//! maximise   sum_l ln(<E_l, W> + e_l) + <C, W>
//! subject to <A_i, W> <= b_i,   W_j >= 0
//! ```
//!
//! with `<X, W> = sum_j Re tr(X_j W_j)`. Its dual has one variable per log
//! term and per constraint:
//!
//! ```text
//! minimise   g(nu, lam) = sum_l (nu_l e_l - ln nu_l - 1) + sum_i lam_i b_i
//! subject to Z_j = -C_j - sum_l nu_l E_lj + sum_i lam_i A_ij >= 0, lam >= 0
//! ```
//!
//! Centring `t g - sum_j ln det Z_j - sum_i ln lam_i` and reading off
//! `W_j = Z_j^-1 / t` leaves a duality gap of exactly
//! `(sum_j dim_j + #constraints) / t`.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::linalg::hermitize;
use crate::{CMat, Error, Result};

/// `scale * matrices[matrix]` placed in block `block`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub block: usize,
    pub matrix: usize,
    pub scale: f64,
}

/// Block-diagonal linear operator, as a sparse list of scaled shared
/// matrices.
pub type Operator = Vec<Term>;

#[derive(Debug, Clone)]
pub struct ConcaveSdp {
    pub block_dims: Vec<usize>,
    /// Hermitian matrices shared by the operators.
    pub matrices: Vec<CMat>,
    pub linear: Operator,
    /// `(E_l, e_l)`, `e_l > 0`.
    pub logs: Vec<(Operator, f64)>,
    /// `(A_i, b_i)`.
    pub constraints: Vec<(Operator, f64)>,
}

/// Newton steps allowed per centring before moving on to the next `t`.
const CENTRING_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptions {
    /// Target duality gap, relative to `max(1, |objective|)`.
    pub gap_tol: f64,
    /// Barrier parameter growth per outer step.
    pub mu: f64,
    pub t0: f64,
    pub max_newton: usize,
    /// Abort as infeasible once the dual objective (an upper bound on the
    /// primal optimum) drops below this value.
    pub stop_below: Option<f64>,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-8, mu: 20.0, t0: 1.0, max_newton: 600, stop_below: None }
    }
}

#[derive(Debug, Clone)]
pub struct SdpOutcome {
    pub blocks: Vec<CMat>,
    pub primal: f64,
    pub dual: f64,
    pub log_multipliers: Vec<f64>,
    pub constraint_multipliers: Vec<f64>,
    pub newton_steps: usize,
}

impl SdpOutcome {
    pub fn gap(&self) -> f64 {
        self.dual - self.primal
    }
}

struct Factored {
    /// `L^-1` of `Z_j = L L^H`, per block.
    l_inv: Vec<CMat>,
    log_det: f64,
}

impl ConcaveSdp {
    fn n_vars(&self) -> usize {
        self.logs.len() + self.constraints.len()
    }

    pub fn operator_value(&self, op: &Operator, blocks: &[CMat]) -> f64 {
        op.iter()
            .map(|t| {
                let m = &self.matrices[t.matrix];
                let w = &blocks[t.block];
                // Re tr(M W) for Hermitian M, W
                t.scale * m.iter().zip(w.transpose().iter()).map(|(a, b)| (a * b).re).sum::<f64>()
            })
            .sum()
    }

    pub fn primal_objective(&self, blocks: &[CMat]) -> f64 {
        let logs: f64 = self.logs.iter().map(|(op, e)| (self.operator_value(op, blocks) + e).ln()).sum();
        logs + self.operator_value(&self.linear, blocks)
    }

    /// Largest constraint violation `<A_i, W> - b_i` (negative when strictly
    /// feasible).
    pub fn max_violation(&self, blocks: &[CMat]) -> f64 {
        self.constraints
            .iter()
            .map(|(op, b)| self.operator_value(op, blocks) - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn validate(&self) -> Result<()> {
        let check = |op: &Operator| {
            op.iter().all(|t| {
                t.block < self.block_dims.len()
                    && t.matrix < self.matrices.len()
                    && self.matrices[t.matrix].shape() == (self.block_dims[t.block], self.block_dims[t.block])
            })
        };
        let ok = check(&self.linear)
            && self.logs.iter().all(|(op, e)| check(op) && *e > 0.0)
            && self.constraints.iter().all(|(op, _)| check(op));
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("SDP operator refers to a missing or mis-sized block".into()))
        }
    }

    /// Per-variable operator of `Z` (`-E_l` for log terms, `+A_i` for
    /// constraints).
    fn var_terms(&self) -> Vec<Vec<(usize, usize, f64)>> {
        let mut out = Vec::with_capacity(self.n_vars());
        for (op, _) in &self.logs {
            out.push(op.iter().map(|t| (t.block, t.matrix, -t.scale)).collect());
        }
        for (op, _) in &self.constraints {
            out.push(op.iter().map(|t| (t.block, t.matrix, t.scale)).collect());
        }
        out
    }

    pub fn z_blocks(&self, x: &[f64]) -> Vec<CMat> {
        let mut z: Vec<CMat> = self.block_dims.iter().map(|&n| CMat::zeros(n, n)).collect();
        for t in &self.linear {
            z[t.block] -= self.matrices[t.matrix].scale(t.scale);
        }
        for (a, terms) in self.var_terms().iter().enumerate() {
            for &(j, m, s) in terms {
                z[j] += self.matrices[m].scale(s * x[a]);
            }
        }
        z
    }

    fn dual_value(&self, x: &[f64]) -> f64 {
        let l = self.logs.len();
        let logs: f64 = self.logs.iter().enumerate().map(|(i, (_, e))| x[i] * e - x[i].ln() - 1.0).sum();
        logs + self.constraints.iter().enumerate().map(|(i, (_, b))| x[l + i] * b).sum::<f64>()
    }

    fn factor(&self, x: &[f64]) -> Option<Factored> {
        let l = self.logs.len();
        if x[..l].iter().any(|v| !(*v > 0.0)) || x[l..].iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let mut l_inv = Vec::with_capacity(self.block_dims.len());
        let mut log_det = 0.0;
        for z in self.z_blocks(x) {
            let chol = Cholesky::new(hermitize(&z))?;
            let lower = chol.l();
            // complex Cholesky never fails outright; an indefinite Z shows up
            // as a non-real pivot
            if lower.diagonal().iter().any(|d| !(d.re > 0.0) || d.im.abs() > 1e-9 * d.re) {
                return None;
            }
            log_det += 2.0 * lower.diagonal().iter().map(|d| d.re.ln()).sum::<f64>();
            let n = lower.nrows();
            let inv = lower.solve_lower_triangular(&CMat::identity(n, n))?;
            l_inv.push(inv);
        }
        Some(Factored { l_inv, log_det })
    }

    fn barrier_value(&self, x: &[f64], t: f64, f: &Factored) -> f64 {
        let l = self.logs.len();
        t * self.dual_value(x) - f.log_det - x[l..].iter().map(|v| v.ln()).sum::<f64>()
    }

    fn newton_system(&self, x: &[f64], t: f64, f: &Factored, terms: &[Vec<(usize, usize, f64)>]) -> (DVector<f64>, DMatrix<f64>) {
        let nv = self.n_vars();
        let nl = self.logs.len();
        // whitened matrices L^-1 M L^-H for every (block, matrix) in use
        let mut used: Vec<(usize, usize)> =
            terms.iter().flat_map(|ts| ts.iter().map(|&(j, m, _)| (j, m))).collect();
        used.sort_unstable();
        used.dedup();
        let whitened: Vec<CMat> = used
            .iter()
            .map(|&(j, m)| {
                let li = &f.l_inv[j];
                li * &self.matrices[m] * li.adjoint()
            })
            .collect();
        let index = |j: usize, m: usize| used.binary_search(&(j, m)).expect("term in use");
        let traces: Vec<f64> = whitened.iter().map(|w| w.trace().re).collect();
        let nu = used.len();
        let mut gram = DMatrix::<f64>::zeros(nu, nu);
        for p in 0..nu {
            for q in p..nu {
                if used[p].0 != used[q].0 {
                    continue;
                }
                let v: f64 = whitened[p].iter().zip(whitened[q].iter()).map(|(a, b)| (a * b.conj()).re).sum();
                gram[(p, q)] = v;
                gram[(q, p)] = v;
            }
        }
        let mut grad = DVector::zeros(nv);
        let mut hess = DMatrix::zeros(nv, nv);
        for a in 0..nv {
            let dg = if a < nl { -1.0 / x[a] + self.logs[a].1 } else { self.constraints[a - nl].1 };
            grad[a] = t * dg - terms[a].iter().map(|&(j, m, s)| s * traces[index(j, m)]).sum::<f64>();
            if a < nl {
                hess[(a, a)] += t / (x[a] * x[a]);
            } else {
                grad[a] -= 1.0 / x[a];
                hess[(a, a)] += 1.0 / (x[a] * x[a]);
            }
            for b in a..nv {
                let mut h = 0.0;
                for &(ja, ma, sa) in &terms[a] {
                    for &(jb, mb, sb) in &terms[b] {
                        if ja == jb {
                            h += sa * sb * gram[(index(ja, ma), index(jb, mb))];
                        }
                    }
                }
                hess[(a, b)] += h;
                if b != a {
                    hess[(b, a)] += h;
                }
            }
        }
        (grad, hess)
    }

    /// Solves from a strictly dual-feasible start `x0 = [nu; lam]`.
    pub fn solve(&self, x0: &[f64], opts: &BarrierOptions) -> Result<SdpOutcome> {
        self.validate()?;
        let nv = self.n_vars();
        if x0.len() != nv {
            return Err(Error::Dimension(format!("{} starting values for {} dual variables", x0.len(), nv)));
        }
        let mut x = x0.to_vec();
        let mut fact = self.factor(&x).ok_or_else(|| Error::InvalidConfig("starting point is not dual-feasible".into()))?;
        let terms = self.var_terms();
        let total_dim = (self.block_dims.iter().sum::<usize>() + self.constraints.len()) as f64;
        let mut t = opts.t0;
        let mut steps = 0usize;
        loop {
            // centring
            let centring_start = steps;
            loop {
                if let Some(bound) = opts.stop_below {
                    if self.dual_value(&x) < bound {
                        return Err(Error::Infeasible(format!("dual bound {} below {}", self.dual_value(&x), bound)));
                    }
                }
                if steps >= opts.max_newton {
                    return Err(Error::MaxIters { iterations: steps });
                }
                // a stalled centring ends here; the dual bound stays valid
                if steps - centring_start >= CENTRING_STEPS {
                    break;
                }
                steps += 1;
                let (grad, hess) = self.newton_system(&x, t, &fact, &terms);
                let Some(chol) = Cholesky::new(hess.clone()) else {
                    return Err(Error::Singular("barrier Hessian".into()));
                };
                let dx = -chol.solve(&grad);
                let decrement = -grad.dot(&dx);
                if decrement / 2.0 <= 1e-10 {
                    break;
                }
                let phi0 = self.barrier_value(&x, t, &fact);
                let mut s = 1.0;
                let mut accepted = None;
                while s > 1e-12 {
                    let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + s * d).collect();
                    if let Some(ft) = self.factor(&trial) {
                        // inside the quadratic region only feasibility matters; the
                        // Armijo test drowns in rounding once t is large
                        if decrement < 0.1 || self.barrier_value(&trial, t, &ft) <= phi0 - 0.25 * s * decrement {
                            accepted = Some((trial, ft));
                            break;
                        }
                    }
                    s *= 0.5;
                }
                match accepted {
                    Some((trial, ft)) => {
                        x = trial;
                        fact = ft;
                    }
                    None => break,
                }
            }
            let dual = self.dual_value(&x);
            if total_dim / t <= opts.gap_tol * dual.abs().max(1.0) {
                break;
            }
            t *= opts.mu;
        }
        let blocks: Vec<CMat> = fact.l_inv.iter().map(|li| hermitize(&(li.adjoint() * li).unscale(t))).collect();
        let nl = self.logs.len();
        Ok(SdpOutcome {
            primal: self.primal_objective(&blocks),
            dual: self.dual_value(&x),
            log_multipliers: x[..nl].to_vec(),
            constraint_multipliers: x[nl..].to_vec(),
            blocks,
            newton_steps: steps,
        })
    }
}
