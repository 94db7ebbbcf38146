//! Constrained group LASSO:
//!
//! ```text
//! min ‖HᵀV − βI‖²_F   s.t.  ‖V‖_{2,1} ≤ ηL,  ‖V‖²_F ≤ P
//! ```
//!
//! The Lagrangian of this program is the penalized objective with `(λ, μ)` as
//! multipliers, so the search looks for the smallest `λ ≥ cfg.lambda` whose
//! inner solution meets the power budget, where the inner solution uses the
//! smallest `μ ≥ cfg.mu` that meets the ℓ2,1 budget.
//!
//! With `μ = 0` the penalized problem is ridge regression, and its whole
//! `λ`-path follows from one eigendecomposition of `HᵀH̄`. That path is
//! tried first; proximal-gradient inner solves are only needed when the
//! ℓ2,1 budget binds.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::{objective, solve_rls_from, SolverConfig, SolverResult};
use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::{conj, l21_norm, residual, PrecodingMatrix};

const BISECTION_STEPS: usize = 60;
const BISECTION_RTOL: f64 = 1e-6;
/// Eigenvalues of `HᵀH̄` below this fraction of the largest are treated as
/// the null space.
const RANK_RTOL: f64 = 1e-10;

/// Ridge solutions `V(λ) = βH̄(HᵀH̄ + λI)⁺` for all `λ ≥ 0`.
struct RidgePath {
    beta: f64,
    /// Nonzero eigenvalues of `HᵀH̄`.
    gains: Vec<f64>,
    /// `H̄U` restricted to the kept eigenvectors, `M×r`.
    hc_u: DMatrix<Complex64>,
    /// Kept eigenvectors, `K×r`.
    u: DMatrix<Complex64>,
    trace: f64,
}

impl RidgePath {
    fn new(h: &ChannelMatrix, beta: f64) -> Self {
        let hm = h.as_matrix();
        let hc = conj(hm);
        let gram = hm.tr_mul(&hc);
        let eig = SymmetricEigen::new(gram);
        let g_max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| g_max > 0.0 && eig.eigenvalues[i] > RANK_RTOL * g_max)
            .collect();
        let u = eig.eigenvectors.select_columns(&keep);
        let gains: Vec<f64> = keep.iter().map(|&i| eig.eigenvalues[i]).collect();
        let hc_u = &hc * &u;
        let trace = gains.iter().sum();
        Self {
            beta,
            gains,
            hc_u,
            u,
            trace,
        }
    }

    fn power(&self, lambda: f64) -> f64 {
        self.beta
            * self.beta
            * self
                .gains
                .iter()
                .map(|&g| g / ((g + lambda) * (g + lambda)))
                .sum::<f64>()
    }

    fn l21(&self, lambda: f64) -> f64 {
        let weights: Vec<f64> = self
            .gains
            .iter()
            .map(|&g| g / ((g + lambda) * (g + lambda)))
            .collect();
        self.u
            .row_iter()
            .map(|row| {
                let sq: f64 = row
                    .iter()
                    .zip(&weights)
                    .map(|(z, w)| z.norm_sqr() * w)
                    .sum();
                self.beta * sq.sqrt()
            })
            .sum()
    }

    fn precoder(&self, lambda: f64) -> PrecodingMatrix {
        let mut scaled = self.hc_u.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= Complex64::new(self.beta / (self.gains[j] + lambda), 0.0);
        }
        scaled * self.u.adjoint()
    }

    /// Smallest `λ ≥ floor` with `power(λ) ≤ budget`.
    fn smallest_feasible_lambda(&self, floor: f64, budget: f64) -> f64 {
        if self.power(floor) <= budget {
            return floor;
        }
        // power(λ) ≤ β² tr(G)/λ², so this upper end is always feasible.
        let mut hi = floor.max(self.beta * (self.trace / budget).sqrt());
        while self.power(hi) > budget {
            hi *= 2.0;
        }
        let mut lo = floor;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.power(mid) > budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

fn data_fit(h: &ChannelMatrix, v: &PrecodingMatrix, beta: f64) -> f64 {
    residual(h.as_matrix(), v, beta).norm_squared()
}

struct Search<'a> {
    h: &'a ChannelMatrix,
    cfg: SolverConfig,
    power: f64,
    budget: f64,
    iterations: usize,
    best: Option<(f64, SolverResult)>,
}

impl Search<'_> {
    fn feasible(&self, v: &PrecodingMatrix) -> bool {
        l21_norm(v) <= self.budget && v.norm_squared() <= self.power
    }

    fn run(&mut self, lambda: f64, mu: f64, warm: &PrecodingMatrix) -> Result<SolverResult> {
        let cfg = SolverConfig {
            lambda,
            mu,
            ..self.cfg
        };
        let r = solve_rls_from(self.h, &cfg, warm)?;
        self.iterations += r.iterations;
        if self.feasible(&r.v_matrix) {
            let fit = data_fit(self.h, &r.v_matrix, self.cfg.beta);
            if self.best.as_ref().is_none_or(|(b, _)| fit < *b) {
                self.best = Some((fit, r.clone()));
            }
        }
        Ok(r)
    }

    /// Smallest `μ ≥ cfg.mu` (to bisection accuracy) meeting the ℓ2,1 budget
    /// at this `λ`. Returns the inner solution at that `μ`.
    fn inner(&mut self, lambda: f64, warm: &PrecodingMatrix) -> Result<SolverResult> {
        let first = self.run(lambda, self.cfg.mu, warm)?;
        if l21_norm(&first.v_matrix) <= self.budget {
            return Ok(first);
        }
        let col_max = self
            .h
            .as_matrix()
            .column_iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let mut lo = self.cfg.mu;
        // V = 0 is optimal from here on.
        let mut hi = (2.0 * self.cfg.beta * col_max).max(lo);
        let mut feasible = self.run(lambda, hi, &first.v_matrix)?;
        if l21_norm(&feasible.v_matrix) > self.budget {
            return Err(Error::Infeasible(format!(
                "l2,1 budget {} not met at mu = {hi}",
                self.budget
            )));
        }
        let mut warm = first.v_matrix;
        for _ in 0..BISECTION_STEPS {
            if hi - lo <= BISECTION_RTOL * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let r = self.run(lambda, mid, &warm)?;
            if l21_norm(&r.v_matrix) <= self.budget {
                hi = mid;
                warm = r.v_matrix.clone();
                feasible = r;
            } else {
                lo = mid;
                warm = r.v_matrix;
            }
        }
        Ok(feasible)
    }
}

/// Minimizes the data-fit term subject to `‖V‖_{2,1} ≤ ηL` and `‖V‖²_F ≤ P`.
///
/// `cfg.lambda` and `cfg.mu` are the lower ends of the regularizer search.
/// `λ` is only raised above `cfg.lambda` when the power budget is violated.
pub fn solve_constrained(
    h: &ChannelMatrix,
    power: f64,
    l_users: usize,
    cfg: &SolverConfig,
) -> Result<SolverResult> {
    cfg.validate()?;
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::InvalidParameter(format!("power = {power}")));
    }
    if l_users == 0 || l_users > h.k_users() {
        return Err(Error::InvalidParameter(format!(
            "l_users = {l_users} must lie in 1..={}",
            h.k_users()
        )));
    }
    let budget = cfg.eta * l_users as f64;

    if cfg.mu == 0.0 {
        let path = RidgePath::new(h, cfg.beta);
        let lambda = path.smallest_feasible_lambda(cfg.lambda, power);
        if path.l21(lambda) <= budget {
            let v = path.precoder(lambda);
            if l21_norm(&v) <= budget * (1.0 + 1e-9) && v.norm_squared() <= power * (1.0 + 1e-9) {
                let at = SolverConfig { lambda, ..*cfg };
                let f = objective(h, &v, &at)?;
                let kkt_residual = super::kkt_residual(h, &v, &at)?;
                return Ok(SolverResult {
                    converged: kkt_residual <= at.kkt_bound(h),
                    v_matrix: v,
                    iterations: 0,
                    objective_trace: vec![f],
                    kkt_residual,
                    lambda,
                    mu: 0.0,
                });
            }
        }
    }

    let mut search = Search {
        h,
        cfg: *cfg,
        power,
        budget,
        iterations: 0,
        best: None,
    };
    let zero = PrecodingMatrix::zeros(h.m_antennas(), h.k_users());
    let start = search.inner(cfg.lambda, &zero)?;
    if start.v_matrix.norm_squared() > power {
        // At λ = β²K/P every penalized minimizer has ‖V‖²_F ≤ P, since
        // λ‖V*‖² ≤ f(V*) ≤ f(0) = β²K.
        let k = h.k_users() as f64;
        let mut hi = (cfg.beta * cfg.beta * k / power).max(cfg.lambda) * (1.0 + 1e-9);
        let mut lo = cfg.lambda;
        let mut warm = start.v_matrix;
        let r = search.inner(hi, &warm)?;
        if r.v_matrix.norm_squared() > power {
            hi *= 2.0;
            let r = search.inner(hi, &r.v_matrix)?;
            if r.v_matrix.norm_squared() > power {
                return Err(Error::Infeasible(format!(
                    "power budget {power} not met at lambda = {hi}"
                )));
            }
        }
        for _ in 0..BISECTION_STEPS {
            if hi - lo <= BISECTION_RTOL * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let r = search.inner(mid, &warm)?;
            if r.v_matrix.norm_squared() <= power {
                hi = mid;
            } else {
                lo = mid;
            }
            warm = r.v_matrix;
        }
    }

    let iterations = search.iterations;
    let (_, mut best) = search.best.ok_or_else(|| {
        Error::Infeasible("no feasible point on the search path".into())
    })?;
    best.iterations = iterations;
    Ok(best)
}
