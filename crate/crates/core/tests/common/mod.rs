//! Independent reference computations for the integration tests. Everything
//! here is written with explicit loops over entries and does not call into the
//! solver or metrics modules.
#![allow(dead_code)]

use gl_precoding::channel::sample_rayleigh;
use gl_precoding::{ChannelMatrix, Complex64, PrecoderOutput, PrecodingMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_channel(m: usize, k: usize, rng: &mut ChaCha8Rng) -> ChannelMatrix {
    sample_rayleigh(m, k, rng).unwrap()
}

pub fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_matrix(m: usize, k: usize, rng: &mut ChaCha8Rng) -> PrecodingMatrix {
    PrecodingMatrix::from_fn(m, k, |_, _| cn(rng))
}

/// `h_kᵀ v_j` summed by hand.
pub fn inner(h: &ChannelMatrix, k: usize, v: &PrecodingMatrix, j: usize) -> Complex64 {
    let hm = h.as_matrix();
    (0..hm.nrows()).map(|i| hm[(i, k)] * v[(i, j)]).sum()
}

pub fn naive_data_fit(h: &ChannelMatrix, v: &PrecodingMatrix, beta: f64) -> f64 {
    let k = h.k_users();
    let mut acc = 0.0;
    for a in 0..k {
        for b in 0..k {
            let mut g = inner(h, a, v, b);
            if a == b {
                g -= beta;
            }
            acc += g.norm_sqr();
        }
    }
    acc
}

pub fn naive_col_norm(v: &PrecodingMatrix, j: usize) -> f64 {
    (0..v.nrows()).map(|i| v[(i, j)].norm_sqr()).sum::<f64>().sqrt()
}

pub fn naive_objective(h: &ChannelMatrix, v: &PrecodingMatrix, lambda: f64, mu: f64, beta: f64) -> f64 {
    let fro: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let l21: f64 = (0..v.ncols()).map(|j| naive_col_norm(v, j)).sum();
    naive_data_fit(h, v, beta) + lambda * fro + mu * l21
}

/// Central differences of the smooth objective along the real and imaginary
/// direction of every entry, combined as `∂/∂Re + i·∂/∂Im`.
pub fn fd_gradient(h: &ChannelMatrix, v: &PrecodingMatrix, lambda: f64, beta: f64, step: f64) -> PrecodingMatrix {
    let f = |x: &PrecodingMatrix| naive_objective(h, x, lambda, 0.0, beta);
    let mut g = PrecodingMatrix::zeros(v.nrows(), v.ncols());
    for i in 0..v.nrows() {
        for j in 0..v.ncols() {
            let mut partial = [0.0; 2];
            for (p, dir) in [Complex64::new(step, 0.0), Complex64::new(0.0, step)].into_iter().enumerate() {
                let mut plus = v.clone();
                plus[(i, j)] += dir;
                let mut minus = v.clone();
                minus[(i, j)] -= dir;
                partial[p] = (f(&plus) - f(&minus)) / (2.0 * step);
            }
            g[(i, j)] = Complex64::new(partial[0], partial[1]);
        }
    }
    g
}

/// Hand-written smooth gradient `2[H̄(HᵀV − βI) + λV]`.
pub fn naive_gradient(h: &ChannelMatrix, v: &PrecodingMatrix, lambda: f64, beta: f64) -> PrecodingMatrix {
    let hm = h.as_matrix();
    let (m, k) = (hm.nrows(), hm.ncols());
    let mut r = vec![vec![Complex64::new(0.0, 0.0); k]; k];
    for (a, row) in r.iter_mut().enumerate() {
        for (b, e) in row.iter_mut().enumerate() {
            *e = inner(h, a, v, b) - if a == b { beta } else { 0.0 };
        }
    }
    PrecodingMatrix::from_fn(m, k, |i, j| {
        let s: Complex64 = (0..k).map(|a| hm[(i, a)].conj() * r[a][j]).sum();
        2.0 * (s + v[(i, j)] * lambda)
    })
}

/// Residual of the prox optimality condition `0 ∈ x − y + t·∂‖x‖₂` for one
/// column: `‖x − y + t·x/‖x‖‖` when `x ≠ 0`, otherwise `max(0, ‖y‖ − t)`.
pub fn prox_condition_residual(x: &[Complex64], y: &[Complex64], t: f64) -> f64 {
    let nx = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nx == 0.0 {
        let ny = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        return (ny - t).max(0.0);
    }
    x.iter()
        .zip(y)
        .map(|(xi, yi)| (xi - yi + xi * (t / nx)).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Best objective value seen by projected subgradient descent with step
/// `1/(L + 2λt)` on the ball `‖V‖_F ≤ β·sqrt(K/λ)`, which contains the
/// minimizer because `λ‖V*‖² ≤ f(V*) ≤ f(0) = β²K`.
pub fn subgradient_oracle(h: &ChannelMatrix, lambda: f64, mu: f64, beta: f64, iterations: usize) -> f64 {
    assert!(lambda > 0.0);
    let (m, k) = (h.m_antennas(), h.k_users());
    let h_fro2: f64 = h.as_matrix().iter().map(|z| z.norm_sqr()).sum();
    let lip = 2.0 * (h_fro2 + lambda);
    let strong = 2.0 * lambda;
    let radius = beta * (k as f64 / lambda).sqrt();
    let mut v = PrecodingMatrix::zeros(m, k);
    let mut best = naive_objective(h, &v, lambda, mu, beta);
    for t in 0..iterations {
        let mut g = naive_gradient(h, &v, lambda, beta);
        for j in 0..k {
            let n = naive_col_norm(&v, j);
            if n > 0.0 {
                for i in 0..m {
                    g[(i, j)] += v[(i, j)] * (mu / n);
                }
            }
        }
        let step = 1.0 / (lip + strong * t as f64);
        v -= g * Complex64::new(step, 0.0);
        let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > radius {
            v *= Complex64::new(radius / n, 0.0);
        }
        best = best.min(naive_objective(h, &v, lambda, mu, beta));
    }
    best
}

/// Plain ISTA with a fixed iteration count, used by the grid-search oracle.
pub fn ista(h: &ChannelMatrix, lambda: f64, mu: f64, beta: f64, iterations: usize) -> PrecodingMatrix {
    let (m, k) = (h.m_antennas(), h.k_users());
    let h_fro2: f64 = h.as_matrix().iter().map(|z| z.norm_sqr()).sum();
    let step = 1.0 / (2.0 * (h_fro2 + lambda));
    let mut v = PrecodingMatrix::zeros(m, k);
    for _ in 0..iterations {
        let g = naive_gradient(h, &v, lambda, beta);
        v -= g * Complex64::new(step, 0.0);
        for j in 0..k {
            let n = naive_col_norm(&v, j);
            let s = if n <= step * mu { 0.0 } else { 1.0 - step * mu / n };
            for i in 0..m {
                v[(i, j)] *= s;
            }
        }
    }
    v
}

/// Smallest data fit over a logarithmic `n×n` grid of `(μ, λ)` among points
/// meeting `‖V‖_{2,1} ≤ ηL` and `‖V‖²_F ≤ P`.
#[allow(clippy::too_many_arguments)]
pub fn grid_search_constrained(
    h: &ChannelMatrix,
    power: f64,
    l_users: usize,
    eta: f64,
    beta: f64,
    mu_range: (f64, f64),
    lambda_range: (f64, f64),
    n: usize,
    iterations: usize,
) -> Option<(f64, f64, f64)> {
    let logspace = |(lo, hi): (f64, f64), i: usize| {
        (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()
    };
    let mut best: Option<(f64, f64, f64)> = None;
    for a in 0..n {
        let mu = logspace(mu_range, a);
        for b in 0..n {
            let lambda = logspace(lambda_range, b);
            let v = ista(h, lambda, mu, beta, iterations);
            let fro: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            let l21: f64 = (0..v.ncols()).map(|j| naive_col_norm(&v, j)).sum();
            if fro <= power * (1.0 + 1e-9) && l21 <= eta * l_users as f64 * (1.0 + 1e-9) {
                let fit = naive_data_fit(h, &v, beta);
                if best.is_none_or(|(f, _, _)| fit < f) {
                    best = Some((fit, mu, lambda));
                }
            }
        }
    }
    best
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn from_samples(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, stderr: (var / n).sqrt() }
    }

    pub fn within(&self, exact: f64, sigmas: f64) -> bool {
        (self.mean - exact).abs() <= sigmas * self.stderr
    }
}

pub struct SymbolEstimates {
    /// Ratio estimate of each selected user's SINR, in selection order.
    pub sinr: Vec<Estimate>,
    pub leakage: Estimate,
    pub rss: Estimate,
}

/// Transmits `draws` blocks of i.i.d. `CN(0,1)` symbols through `y = Hᵀx + z`
/// with `x = Σ_{ℓ∈S} v_ℓ s_ℓ` and measures signal, interference-plus-noise,
/// leakage and the per-user squared deviation from `β·a_k·s_k`.
pub fn symbol_monte_carlo(
    h: &ChannelMatrix,
    out: &PrecoderOutput,
    noise_var: f64,
    beta: f64,
    draws: usize,
    rng: &mut ChaCha8Rng,
) -> SymbolEstimates {
    let (m, k) = (h.m_antennas(), h.k_users());
    let v = &out.v_matrix;
    let sel = &out.selected_set;
    let hm = h.as_matrix();
    let mut sig = vec![Vec::with_capacity(draws); sel.len()];
    let mut inn = vec![Vec::with_capacity(draws); sel.len()];
    let mut leak = Vec::with_capacity(draws);
    let mut dev = Vec::with_capacity(draws);
    let mut s = vec![Complex64::new(0.0, 0.0); k];
    let mut x = vec![Complex64::new(0.0, 0.0); m];
    for _ in 0..draws {
        for sk in s.iter_mut() {
            *sk = cn(rng);
        }
        x.iter_mut().for_each(|xi| *xi = Complex64::new(0.0, 0.0));
        for &l in sel {
            for i in 0..m {
                x[i] += v[(i, l)] * s[l];
            }
        }
        let mut leak_t = 0.0;
        let mut dev_t = 0.0;
        for u in 0..k {
            let z = cn(rng) * noise_var.sqrt();
            let hx: Complex64 = (0..m).map(|i| hm[(i, u)] * x[i]).sum();
            if let Some(pos) = sel.iter().position(|&l| l == u) {
                let desired: Complex64 = (0..m).map(|i| hm[(i, u)] * v[(i, u)]).sum::<Complex64>() * s[u];
                sig[pos].push(desired.norm_sqr());
                inn[pos].push((hx - desired + z).norm_sqr());
                dev_t += (hx - beta * s[u]).norm_sqr();
            } else {
                leak_t += hx.norm_sqr();
                dev_t += hx.norm_sqr();
            }
        }
        leak.push(leak_t);
        dev.push(dev_t / k as f64);
    }
    let sinr = sig
        .iter()
        .zip(&inn)
        .map(|(a, b)| ratio_estimate(a, b))
        .collect();
    SymbolEstimates {
        sinr,
        leakage: Estimate::from_samples(&leak),
        rss: Estimate::from_samples(&dev),
    }
}

/// `mean(a)/mean(b)` with a delta-method standard error.
fn ratio_estimate(a: &[f64], b: &[f64]) -> Estimate {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut vaa = 0.0;
    let mut vbb = 0.0;
    let mut vab = 0.0;
    for (x, y) in a.iter().zip(b) {
        vaa += (x - ma) * (x - ma);
        vbb += (y - mb) * (y - mb);
        vab += (x - ma) * (y - mb);
    }
    vaa /= n - 1.0;
    vbb /= n - 1.0;
    vab /= n - 1.0;
    let r = ma / mb;
    let var = (vaa - 2.0 * r * vab + r * r * vbb) / (mb * mb * n);
    Estimate { mean: r, stderr: var.max(0.0).sqrt() }
}
