//! Joint selection + precoding from the group-LASSO solution, and the MRT
//! baseline with uniformly random user selection.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::{column_norms, nonzero_columns, PrecodingMatrix};
use crate::solver::{solve_constrained, SolverConfig, SolverResult};

/// `V = W·sqrt(diag(p))` together with its factors and the selected users.
///
/// User indices are 0-based. Columns of unselected users are exactly zero in
/// both `W` and `V`, and their power is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderOutput {
    pub w_matrix: DMatrix<Complex64>,
    pub power_vector: Vec<f64>,
    /// Selected users, ascending.
    pub selected_set: Vec<usize>,
    pub v_matrix: PrecodingMatrix,
}

impl PrecoderOutput {
    fn from_precoder(v_matrix: PrecodingMatrix, mut selected_set: Vec<usize>) -> Self {
        selected_set.sort_unstable();
        let (w_matrix, power_vector) = decompose(&v_matrix);
        Self {
            w_matrix,
            power_vector,
            selected_set,
            v_matrix,
        }
    }

    pub fn l_users(&self) -> usize {
        self.selected_set.len()
    }

    pub fn k_users(&self) -> usize {
        self.power_vector.len()
    }

    pub fn is_selected(&self, user: usize) -> bool {
        self.selected_set.binary_search(&user).is_ok()
    }

    pub fn total_power(&self) -> f64 {
        self.power_vector.iter().sum()
    }
}

/// Splits `V` into unit-norm beamformers and powers: `p_k = ‖v_k‖²`,
/// `w_k = v_k/‖v_k‖`, and `w_k = 0` for a zero column.
pub fn decompose(v: &PrecodingMatrix) -> (DMatrix<Complex64>, Vec<f64>) {
    let mut w = v.clone();
    let mut p = Vec::with_capacity(v.ncols());
    for mut col in w.column_iter_mut() {
        let sq = col.norm_squared();
        p.push(sq);
        if sq > 0.0 {
            col /= Complex64::new(sq.sqrt(), 0.0);
        }
    }
    (w, p)
}

/// Indices of the `l` largest norms; equal norms go to the lower index.
fn top_indices(norms: &[f64], l: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..norms.len()).collect();
    // Stable sort keeps ascending index order among ties.
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    order.truncate(l);
    order
}

fn check_selection(h: &ChannelMatrix, power: f64, l_users: usize) -> Result<()> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::InvalidParameter(format!("power = {power}")));
    }
    if l_users == 0 || l_users > h.k_users() {
        return Err(Error::InvalidParameter(format!(
            "l_users = {l_users} must lie in 1..={}",
            h.k_users()
        )));
    }
    Ok(())
}

/// Joint user selection and precoding:
///
/// 1. solve the constrained group LASSO for `V`;
/// 2. keep the `L` columns of largest norm, zero the rest;
/// 3. rescale so that `‖V‖²_F = P`;
/// 4. decompose `V = W sqrt(P)`.
///
/// Returns the output together with the solver diagnostics.
pub fn group_lasso_precoder(
    h: &ChannelMatrix,
    power: f64,
    l_users: usize,
    cfg: &SolverConfig,
) -> Result<(PrecoderOutput, SolverResult)> {
    check_selection(h, power, l_users)?;
    let solution = solve_constrained(h, power, l_users, cfg)?;
    if nonzero_columns(&solution.v_matrix) == 0 {
        return Err(Error::DegenerateSolution {
            diagnostics: Box::new(solution),
        });
    }
    let selected = top_indices(&column_norms(&solution.v_matrix), l_users);
    let mut v = PrecodingMatrix::zeros(h.m_antennas(), h.k_users());
    for &k in &selected {
        v.set_column(k, &solution.v_matrix.column(k));
    }
    let scale = (power.sqrt() / v.norm()).min(f64::MAX);
    v *= Complex64::new(scale, 0.0);
    Ok((PrecoderOutput::from_precoder(v, selected), solution))
}

/// MRT with random selection: `L` users drawn uniformly without replacement
/// from `rng`, each served with `v_k = sqrt(P/L)·h̄_k/‖h_k‖`.
///
/// The subset depends only on `K`, `L` and the stream, never on `H`.
pub fn mrt_random<R: Rng + ?Sized>(
    h: &ChannelMatrix,
    power: f64,
    l_users: usize,
    rng: &mut R,
) -> Result<PrecoderOutput> {
    check_selection(h, power, l_users)?;
    let selected = rand::seq::index::sample(rng, h.k_users(), l_users).into_vec();
    let amplitude = (power / l_users as f64).sqrt();
    let mut v = PrecodingMatrix::zeros(h.m_antennas(), h.k_users());
    for &k in &selected {
        let hk = h.column(k);
        let norm = hk.norm();
        if norm == 0.0 {
            return Err(Error::DegenerateChannel { user: k });
        }
        let col = hk.map(|z| z.conj() * (amplitude / norm));
        v.set_column(k, &col);
    }
    Ok(PrecoderOutput::from_precoder(v, selected))
}
