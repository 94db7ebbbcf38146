//! Closed-form performance measures for a precoded downlink.
//!
//! Every quantity here is an expectation over unit-variance symbols, which
//! reduces to a function of `H`, `V` and the noise variances. Nothing is
//! sampled.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::{check_same_shape, residual, PrecodingMatrix};
use crate::precoder::PrecoderOutput;

/// Per-user receiver noise variances `σ_k²`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProfile {
    variances: Vec<f64>,
}

impl NoiseProfile {
    pub fn new(variances: Vec<f64>) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::InvalidParameter("empty noise profile".into()));
        }
        if let Some(v) = variances.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("noise variance {v}")));
        }
        Ok(Self { variances })
    }

    pub fn uniform(k_users: usize, variance: f64) -> Result<Self> {
        Self::new(vec![variance; k_users])
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// Zero for unselected users.
    pub per_user_sinr: Vec<f64>,
    /// `log₂(1 + SINR)` in bits; zero for unselected users.
    pub per_user_rate: Vec<f64>,
    pub avg_throughput: f64,
    /// Total leakage power at unselected users.
    pub leakage: f64,
    /// `leakage / (K − L)`, zero when every user is selected.
    pub leakage_per_unselected: f64,
    pub rss: f64,
    pub d_value: f64,
}

/// `G[k, l] = h_kᵀ v_l`.
fn cross_gains(h: &ChannelMatrix, v: &PrecodingMatrix) -> Result<DMatrix<Complex64>> {
    check_same_shape((h.m_antennas(), h.k_users()), v.shape())?;
    Ok(h.as_matrix().tr_mul(v))
}

fn check_noise(h: &ChannelMatrix, noise: &NoiseProfile) -> Result<()> {
    if noise.variances.len() != h.k_users() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} noise variances", h.k_users()),
            found: format!("{}", noise.variances.len()),
        });
    }
    Ok(())
}

fn sinr_from_gains(gains: &DMatrix<Complex64>, out: &PrecoderOutput, noise: &NoiseProfile, user: usize) -> f64 {
    let signal = gains[(user, user)].norm_sqr();
    let interference: f64 = out
        .selected_set
        .iter()
        .filter(|&&j| j != user)
        .map(|&j| gains[(user, j)].norm_sqr())
        .sum();
    signal / (noise.variances[user] + interference)
}

/// `|h_ℓᵀv_ℓ|² / (σ_ℓ² + Σ_{j∈S, j≠ℓ} |h_ℓᵀv_j|²)` for a selected user `ℓ`.
pub fn sinr(h: &ChannelMatrix, out: &PrecoderOutput, noise: &NoiseProfile, user: usize) -> Result<f64> {
    check_noise(h, noise)?;
    if !out.is_selected(user) {
        return Err(Error::Domain(format!("user {user} is not selected")));
    }
    let gains = cross_gains(h, &out.v_matrix)?;
    Ok(sinr_from_gains(&gains, out, noise, user))
}

/// `(1/L)·Σ_{ℓ∈S} weights[ℓ]·log₂(1 + SINR_ℓ)`.
pub fn avg_throughput(
    h: &ChannelMatrix,
    out: &PrecoderOutput,
    noise: &NoiseProfile,
    weights: &[f64],
) -> Result<f64> {
    check_noise(h, noise)?;
    if out.selected_set.is_empty() {
        return Err(Error::Domain("no selected users".into()));
    }
    if weights.len() != h.k_users() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} weights", h.k_users()),
            found: format!("{}", weights.len()),
        });
    }
    let gains = cross_gains(h, &out.v_matrix)?;
    let total: f64 = out
        .selected_set
        .iter()
        .map(|&l| weights[l] * (1.0 + sinr_from_gains(&gains, out, noise, l)).log2())
        .sum();
    Ok(total / out.l_users() as f64)
}

fn leakage_from_gains(gains: &DMatrix<Complex64>, out: &PrecoderOutput) -> f64 {
    (0..gains.nrows())
        .filter(|k| !out.is_selected(*k))
        .map(|k| {
            out.selected_set
                .iter()
                .map(|&l| gains[(k, l)].norm_sqr())
                .sum::<f64>()
        })
        .sum()
}

/// `Σ_{k∉S} Σ_{ℓ∈S} |h_kᵀv_ℓ|²`.
pub fn power_leakage(h: &ChannelMatrix, out: &PrecoderOutput) -> Result<f64> {
    let gains = cross_gains(h, &out.v_matrix)?;
    Ok(leakage_from_gains(&gains, out))
}

/// Leakage averaged over the `K − L` unselected users (zero if there are none).
pub fn leakage_per_unselected(h: &ChannelMatrix, out: &PrecoderOutput) -> Result<f64> {
    let unselected = h.k_users() - out.l_users();
    if unselected == 0 {
        return Ok(0.0);
    }
    Ok(power_leakage(h, out)? / unselected as f64)
}

/// `D = ‖HᵀV − βI‖²_F`.
pub fn d_value(h: &ChannelMatrix, v: &PrecodingMatrix, beta: f64) -> Result<f64> {
    check_same_shape((h.m_antennas(), h.k_users()), v.shape())?;
    Ok(residual(h.as_matrix(), v, beta).norm_squared())
}

/// `RSS = D/K − (1 − L/K)·β²`.
pub fn rss(h: &ChannelMatrix, v: &PrecodingMatrix, beta: f64, l_users: usize, k_users: usize) -> Result<f64> {
    if l_users > k_users || k_users == 0 {
        return Err(Error::Domain(format!("L = {l_users}, K = {k_users}")));
    }
    let k = k_users as f64;
    Ok(d_value(h, v, beta)? / k - (1.0 - l_users as f64 / k) * beta * beta)
}

/// All measures with uniform unit weights.
pub fn evaluate(h: &ChannelMatrix, out: &PrecoderOutput, noise: &NoiseProfile, beta: f64) -> Result<MetricsReport> {
    check_noise(h, noise)?;
    if out.selected_set.is_empty() {
        return Err(Error::Domain("no selected users".into()));
    }
    let gains = cross_gains(h, &out.v_matrix)?;
    let k = h.k_users();
    let mut per_user_sinr = vec![0.0; k];
    let mut per_user_rate = vec![0.0; k];
    for &l in &out.selected_set {
        let s = sinr_from_gains(&gains, out, noise, l);
        per_user_sinr[l] = s;
        per_user_rate[l] = (1.0 + s).log2();
    }
    let avg_throughput = out.selected_set.iter().map(|&l| per_user_rate[l]).sum::<f64>() / out.l_users() as f64;
    let leakage = leakage_from_gains(&gains, out);
    let unselected = k - out.l_users();
    let d = d_value(h, &out.v_matrix, beta)?;
    Ok(MetricsReport {
        per_user_sinr,
        per_user_rate,
        avg_throughput,
        leakage,
        leakage_per_unselected: if unselected == 0 { 0.0 } else { leakage / unselected as f64 },
        rss: d / k as f64 - (1.0 - out.l_users() as f64 / k as f64) * beta * beta,
        d_value: d,
    })
}
