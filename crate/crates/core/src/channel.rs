//! Rayleigh channel realizations and the plain-text fixture format.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVectorView};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::all_finite;

/// `M×K` downlink channel; column `k` is the channel vector `h_k` of user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: DMatrix<Complex64>,
}

impl ChannelMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "channel must be at least 1x1, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if !all_finite(&entries) {
            return Err(Error::NonFinite("channel matrix"));
        }
        Ok(Self { entries })
    }

    /// Builds `H = [h_1, …, h_K]` from per-user channel vectors of equal length.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let k = columns.len();
        let m = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != m) {
            return Err(Error::Dimension("channel columns differ in length".into()));
        }
        let mut entries = DMatrix::zeros(m, k);
        for (j, col) in columns.iter().enumerate() {
            for (i, z) in col.iter().enumerate() {
                entries[(i, j)] = *z;
            }
        }
        Self::new(entries)
    }

    pub fn m_antennas(&self) -> usize {
        self.entries.nrows()
    }

    pub fn k_users(&self) -> usize {
        self.entries.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn column(&self, k: usize) -> DVectorView<'_, Complex64> {
        self.entries.column(k)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.entries.map(|z| z * c))
    }

    /// Writes the fixture format: `M K` on the first line, then `M·K` lines of
    /// `re im`, user-major (all antennas of user 0 first).
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.m_antennas(), self.k_users())?;
        for col in self.entries.column_iter() {
            for z in col.iter() {
                writeln!(out, "{:e} {:e}", z.re, z.im)?;
            }
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing `M K` header".into(),
        })?;
        let dims = parse_pair::<usize>(ln, header)?;
        let (m, k) = dims;
        if m == 0 || k == 0 {
            return Err(Error::Dimension(format!("fixture declares {m}x{k}")));
        }
        let mut entries = DMatrix::zeros(m, k);
        for idx in 0..m * k {
            let (ln, line) = lines.next().ok_or(Error::Parse {
                line: ln + idx + 1,
                msg: format!("expected {} entries, found {idx}", m * k),
            })?;
            let (re, im) = parse_pair::<f64>(ln, line)?;
            entries[(idx % m, idx / m)] = Complex64::new(re, im);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse {
                line: ln,
                msg: "trailing data after the last entry".into(),
            });
        }
        Self::new(entries)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("write to Vec");
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }
}

fn parse_pair<T: std::str::FromStr>(line: usize, s: &str) -> Result<(T, T)> {
    let mut it = s.split_whitespace();
    let mut next = || -> Result<T> {
        it.next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected two numbers, got `{s}`"),
            })
    };
    let a = next()?;
    let b = next()?;
    if it.next().is_some() {
        return Err(Error::Parse {
            line,
            msg: format!("expected two numbers, got `{s}`"),
        });
    }
    Ok((a, b))
}

/// Draws `H` with i.i.d. `CN(0, 1)` entries: real and imaginary parts are
/// independent `N(0, 1/2)`. Entries are drawn user-major.
pub fn sample_rayleigh<R: Rng + ?Sized>(
    m_antennas: usize,
    k_users: usize,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    if m_antennas == 0 || k_users == 0 {
        return Err(Error::Dimension(format!(
            "channel must be at least 1x1, got {m_antennas}x{k_users}"
        )));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut entries = DMatrix::zeros(m_antennas, k_users);
    for k in 0..k_users {
        for m in 0..m_antennas {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            entries[(m, k)] = Complex64::new(scale * re, scale * im);
        }
    }
    ChannelMatrix::new(entries)
}

/// What a derived random stream is used for. Streams with different purposes
/// never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Channel = 0,
    UserSelection = 1,
    Fixture = 2,
}

/// Counter-based stream keyed by `(master_seed, purpose, cell)` with the
/// ChaCha stream id set to `index`. Any two distinct keys give independent,
/// non-overlapping sequences, so trials can run in any order or in parallel.
pub fn derived_stream(master_seed: u64, purpose: StreamPurpose, cell: [u64; 2], index: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    seed[16..24].copy_from_slice(&cell[0].to_le_bytes());
    seed[24..32].copy_from_slice(&cell[1].to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        derived_stream(seed, StreamPurpose::Fixture, [0, 0], 0)
    }

    #[test]
    fn same_seed_same_matrix() {
        let a = sample_rayleigh(4, 4, &mut rng(11)).unwrap();
        let b = sample_rayleigh(4, 4, &mut rng(11)).unwrap();
        assert_eq!(a, b);
        let c = sample_rayleigh(4, 4, &mut rng(12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(sample_rayleigh(0, 3, &mut rng(1)), Err(Error::Dimension(_))));
        assert!(matches!(sample_rayleigh(3, 0, &mut rng(1)), Err(Error::Dimension(_))));
    }

    #[test]
    fn unit_average_power() {
        let h = sample_rayleigh(64, 64, &mut rng(3)).unwrap();
        let mean = h.as_matrix().iter().map(|z| z.norm_sqr()).sum::<f64>() / 4096.0;
        assert!((mean - 1.0).abs() < 0.1, "mean |h|^2 = {mean}");
    }

    #[test]
    fn component_moments() {
        let h = sample_rayleigh(32, 32, &mut rng(5)).unwrap();
        let n = 1024.0;
        let parts = [
            h.as_matrix().iter().map(|z| z.re).collect::<Vec<_>>(),
            h.as_matrix().iter().map(|z| z.im).collect::<Vec<_>>(),
        ];
        for p in &parts {
            let mean = p.iter().sum::<f64>() / n;
            let var = p.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!(mean.abs() < 0.06, "mean {mean}");
            assert!((var - 0.5).abs() < 0.05, "var {var}");
        }
    }

    #[test]
    fn streams_are_distinct() {
        let mut a = derived_stream(7, StreamPurpose::Channel, [16, 16], 0);
        let mut b = derived_stream(7, StreamPurpose::Channel, [16, 16], 1);
        let mut c = derived_stream(7, StreamPurpose::UserSelection, [16, 16], 0);
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert_ne!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let h = sample_rayleigh(3, 2, &mut rng(9)).unwrap();
        let mut buf = Vec::new();
        h.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("3 2\n"));
        assert_eq!(text.lines().count(), 7);
        assert_eq!(ChannelMatrix::parse_text(&text).unwrap(), h);
    }

    #[test]
    fn text_is_user_major() {
        let h = ChannelMatrix::from_columns(&[
            vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)],
            vec![Complex64::new(3.0, -1.0), Complex64::new(4.0, 0.5)],
        ])
        .unwrap();
        let mut buf = Vec::new();
        h.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[1], "1e0 0e0");
        assert_eq!(lines[3], "3e0 -1e0");
    }

    #[test]
    fn malformed_text_rejected() {
        assert!(matches!(ChannelMatrix::parse_text(""), Err(Error::Parse { .. })));
        assert!(matches!(ChannelMatrix::parse_text("1 1\n1.0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(ChannelMatrix::parse_text("1 1\n1 0\n2 0\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(ChannelMatrix::parse_text("1 2\n1 0\n"), Err(Error::Parse { .. })));
        assert!(matches!(ChannelMatrix::parse_text("1 1\nNaN 0\n"), Err(Error::NonFinite(_))));
    }

    #[test]
    fn non_finite_rejected() {
        let mut m = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        m[(1, 1)] = Complex64::new(f64::INFINITY, 0.0);
        assert!(ChannelMatrix::new(m).is_err());
    }
}
