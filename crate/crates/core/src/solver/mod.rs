//! Group-LASSO precoding programs.
//!
//! The penalized (RLS) form
//!
//! ```text
//! f(V) = ‖HᵀV − βI‖²_F + λ‖V‖²_F + μ‖V‖_{2,1}
//! ```
//!
//! is minimized by proximal gradient with optional Nesterov acceleration
//! ([`solve_rls`]). The constrained form, `‖V‖_{2,1} ≤ ηL` and `‖V‖²_F ≤ P`,
//! is handled by [`solve_constrained`], which searches over `(λ, μ)`.
//!
//! Gradients use the real-differential convention: for a complex entry
//! `V_ij = a + ib`, the gradient entry is `∂f/∂a + i ∂f/∂b`. With that
//! convention the smooth part has gradient `2[H̄(HᵀV − βI) + λV]` and the
//! update is `V ← V − tG`.

mod constrained;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

pub use constrained::solve_constrained;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::{check_same_shape, conj, residual, sigma_max_sq, PrecodingMatrix};

/// Step-size safety factor on the power-iteration estimate of `σ_max(H)²`,
/// which approaches the true value from below.
const LIPSCHITZ_MARGIN: f64 = 1.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Ridge weight λ ≥ 0.
    pub lambda: f64,
    /// Group-sparsity weight μ ≥ 0.
    pub mu: f64,
    /// Target received amplitude β > 0.
    pub beta: f64,
    /// ℓ2,1 budget per selected user η > 0 (constrained form only).
    pub eta: f64,
    pub max_iterations: usize,
    /// Relative objective change at which iteration stops.
    pub tolerance: f64,
    pub acceleration: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            mu: 0.0,
            beta: 1.0,
            eta: 1.0,
            max_iterations: 5000,
            tolerance: 1e-8,
            acceleration: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: f64| Error::InvalidParameter(format!("{name} = {v}"));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(bad("lambda", self.lambda));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(bad("mu", self.mu));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(bad("beta", self.beta));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(bad("eta", self.eta));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(bad("tolerance", self.tolerance));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations = 0".into()));
        }
        Ok(())
    }

    /// KKT residual below which a run that has stopped on the objective
    /// criterion is reported as converged: `sqrt(tol)·max(1, ‖∇f(0)‖_F)`.
    pub fn kkt_bound(&self, h: &ChannelMatrix) -> f64 {
        let grad_at_zero = 2.0 * self.beta * h.as_matrix().norm();
        self.tolerance.sqrt() * grad_at_zero.max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverResult {
    #[serde(skip)]
    pub v_matrix: PrecodingMatrix,
    pub iterations: usize,
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub kkt_residual: f64,
    /// Regularizers of the penalized problem the returned point solves.
    pub lambda: f64,
    pub mu: f64,
}

fn check_dims(h: &ChannelMatrix, v: &PrecodingMatrix) -> Result<()> {
    check_same_shape((h.m_antennas(), h.k_users()), v.shape())
}

fn data_fit_of(hv: &DMatrix<Complex64>, beta: f64) -> f64 {
    let mut acc = 0.0;
    for (j, col) in hv.column_iter().enumerate() {
        for (i, z) in col.iter().enumerate() {
            acc += if i == j {
                (z - Complex64::new(beta, 0.0)).norm_sqr()
            } else {
                z.norm_sqr()
            };
        }
    }
    acc
}

fn penalties(v: &PrecodingMatrix, lambda: f64, mu: f64) -> f64 {
    let mut ridge = 0.0;
    let mut group = 0.0;
    for col in v.column_iter() {
        let sq = col.norm_squared();
        ridge += sq;
        group += sq.sqrt();
    }
    lambda * ridge + mu * group
}

/// `‖HᵀV − βI‖²_F + λ‖V‖²_F + μ‖V‖_{2,1}`.
pub fn objective(h: &ChannelMatrix, v: &PrecodingMatrix, cfg: &SolverConfig) -> Result<f64> {
    check_dims(h, v)?;
    let hv = h.as_matrix().tr_mul(v);
    Ok(data_fit_of(&hv, cfg.beta) + penalties(v, cfg.lambda, cfg.mu))
}

/// Gradient of the smooth part, `2[H̄(HᵀV − βI) + λV]`.
pub fn smooth_gradient(
    h: &ChannelMatrix,
    v: &PrecodingMatrix,
    lambda: f64,
    beta: f64,
) -> Result<PrecodingMatrix> {
    check_dims(h, v)?;
    let r = residual(h.as_matrix(), v, beta);
    let mut g = conj(h.as_matrix()) * r;
    g.zip_apply(v, |gi, vi| *gi = 2.0 * (*gi + vi * lambda));
    Ok(g)
}

/// Proximal operator of `threshold·‖·‖_{2,1}`: each column is scaled by
/// `max(0, 1 − threshold/‖v_k‖)`. Columns with `‖v_k‖ ≤ threshold` come out
/// exactly zero.
pub fn block_soft_threshold(v: &PrecodingMatrix, threshold: f64) -> PrecodingMatrix {
    let mut out = v.clone();
    shrink_columns(&mut out, threshold);
    out
}

fn shrink_columns(v: &mut PrecodingMatrix, threshold: f64) {
    if threshold == 0.0 {
        return;
    }
    for mut col in v.column_iter_mut() {
        let n = col.norm();
        if n <= threshold {
            col.fill(Complex64::new(0.0, 0.0));
        } else {
            col *= Complex64::new(1.0 - threshold / n, 0.0);
        }
    }
}

/// Norm of the minimal-norm element of `∇f_smooth(V) + μ∂‖V‖_{2,1}`.
pub fn kkt_residual(h: &ChannelMatrix, v: &PrecodingMatrix, cfg: &SolverConfig) -> Result<f64> {
    let g = smooth_gradient(h, v, cfg.lambda, cfg.beta)?;
    Ok(kkt_from_gradient(&g, v, cfg.mu))
}

fn kkt_from_gradient(g: &PrecodingMatrix, v: &PrecodingMatrix, mu: f64) -> f64 {
    let mut acc = 0.0;
    for (gk, vk) in g.column_iter().zip(v.column_iter()) {
        let nv = vk.norm();
        let r = if nv > 0.0 {
            (gk + vk * Complex64::new(mu / nv, 0.0)).norm_squared()
        } else {
            (gk.norm() - mu).max(0.0).powi(2)
        };
        acc += r;
    }
    acc.sqrt()
}

/// Solves the penalized problem from `V₀ = 0`.
pub fn solve_rls(h: &ChannelMatrix, cfg: &SolverConfig) -> Result<SolverResult> {
    let zero = PrecodingMatrix::zeros(h.m_antennas(), h.k_users());
    solve_rls_from(h, cfg, &zero)
}

/// Proximal gradient with step `1/L_f`, `L_f = 2(σ_max(H)² + λ)`, started from
/// `v0`. With acceleration on, FISTA momentum is used and reset whenever the
/// objective increases.
///
/// Iteration stops once the relative objective change is at most
/// `cfg.tolerance` and the KKT residual is within [`SolverConfig::kkt_bound`],
/// or after `cfg.max_iterations` steps.
pub fn solve_rls_from(
    h: &ChannelMatrix,
    cfg: &SolverConfig,
    v0: &PrecodingMatrix,
) -> Result<SolverResult> {
    cfg.validate()?;
    check_dims(h, v0)?;
    let hm = h.as_matrix();
    let hc = conj(hm);
    let beta = Complex64::new(cfg.beta, 0.0);

    let mut lipschitz = 2.0 * (LIPSCHITZ_MARGIN * sigma_max_sq(hm) + cfg.lambda);
    if lipschitz == 0.0 {
        // H = 0 and λ = 0: the smooth part is constant.
        lipschitz = 1.0;
    }
    let step = 1.0 / lipschitz;
    let kkt_bound = cfg.kkt_bound(h);

    let mut x = v0.clone();
    let mut hx = hm.tr_mul(&x);
    let mut y = x.clone();
    let mut hy = hx.clone();
    let mut theta = 1.0_f64;
    let mut f = data_fit_of(&hx, cfg.beta) + penalties(&x, cfg.lambda, cfg.mu);
    let mut trace = vec![f];
    let mut converged = false;
    let mut kkt = None;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let mut r = hy.clone();
        for k in 0..r.nrows().min(r.ncols()) {
            r[(k, k)] -= beta;
        }
        // y − t·2[H̄r + λy]
        let mut x_new = &hc * r;
        x_new.zip_apply(&y, |gi, yi| {
            *gi = yi * (1.0 - 2.0 * step * cfg.lambda) - *gi * (2.0 * step)
        });
        shrink_columns(&mut x_new, step * cfg.mu);
        let hx_new = hm.tr_mul(&x_new);
        let f_new = data_fit_of(&hx_new, cfg.beta) + penalties(&x_new, cfg.lambda, cfg.mu);
        if !f_new.is_finite() {
            return Err(Error::NumericDivergence { iteration: iterations });
        }
        trace.push(f_new);

        if cfg.acceleration && f_new <= f {
            let theta_new = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let w = Complex64::new((theta - 1.0) / theta_new, 0.0);
            y = &x_new + (&x_new - &x) * w;
            hy = &hx_new + (&hx_new - &hx) * w;
            theta = theta_new;
        } else {
            y = x_new.clone();
            hy = hx_new.clone();
            theta = 1.0;
        }

        let small_change = (f - f_new).abs() <= cfg.tolerance * f.abs().max(f_new.abs());
        x = x_new;
        hx = hx_new;
        f = f_new;

        if small_change {
            let mut r = hx.clone();
            for k in 0..r.nrows().min(r.ncols()) {
                r[(k, k)] -= beta;
            }
            let mut g = &hc * r;
            g.zip_apply(&x, |gi, xi| *gi = 2.0 * (*gi + xi * cfg.lambda));
            let res = kkt_from_gradient(&g, &x, cfg.mu);
            kkt = Some(res);
            if res <= kkt_bound {
                converged = true;
                break;
            }
        } else {
            kkt = None;
        }
    }

    let kkt_residual = match kkt {
        Some(k) => k,
        None => kkt_residual(h, &x, cfg)?,
    };
    Ok(SolverResult {
        v_matrix: x,
        iterations,
        objective_trace: trace,
        converged,
        kkt_residual,
        lambda: cfg.lambda,
        mu: cfg.mu,
    })
}
