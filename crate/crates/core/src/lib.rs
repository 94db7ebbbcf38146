//! Joint user selection and linear precoding for the multiuser MIMO downlink,
//! posed as group-sparse recovery.
//!
//! The base station picks `L` of `K` single-antenna users and designs the
//! overall precoding matrix `V = W sqrt(P)` by solving a group-LASSO program
//! over the columns of `V`:
//!
//! ```text
//! min_V ‖HᵀV − βI‖²_F + λ‖V‖²_F + μ Σ_k ‖v_k‖₂
//! ```
//!
//! Modules:
//!
//! * [`channel`]: i.i.d. Rayleigh channel realizations and a text fixture format.
//! * [`solver`]: accelerated proximal gradient for the penalized form and a
//!   regularizer search for the constrained form.
//! * [`precoder`]: group-LASSO selection + precoding, and the MRT baseline with
//!   random user selection.
//! * [`metrics`]: SINR, rates, average throughput, power leakage, RSS.
//! * [`scenarios`]: seeded Monte-Carlo sweeps over the array size and CSV output.

pub mod channel;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod precoder;
pub mod scenarios;
pub mod solver;

mod linalg;

pub use channel::ChannelMatrix;
pub use error::{Error, Result};
pub use linalg::{l21_norm, nonzero_columns, PrecodingMatrix};
pub use metrics::{MetricsReport, NoiseProfile};
pub use precoder::PrecoderOutput;
pub use scenarios::{ScenarioConfig, SweepRecord};
pub use solver::{SolverConfig, SolverResult};

pub use num_complex::Complex64;
