//! Sensitivity analysis for Ramsey interferometry with generalized
//! one-axis-twisting (OAT) echoes.
//!
//! A generalized echo protocol on `N` two-level atoms runs
//!
//! ```text
//!   |x> --- twist(mu) --- rotate(n, phi) --- twist(nu - mu) --- measure S_m
//! ```
//!
//! where `|x>` is the equatorial coherent spin state, `twist(a)` is the OAT
//! unitary `exp(-i a S_z^2 / 2)`, and `nu` measures the deviation of the
//! second twist from an exact inversion of the first.  The local sensitivity
//! of the protocol around `phi = 0` is the signal-to-noise ratio
//!
//! ```text
//!   1/dphi = n^T M m / sqrt(m^T Q m)
//! ```
//!
//! built from the slope matrix `M` and spin covariance matrix `Q`, both of
//! which are known in closed form for any `N`, `mu`, `nu` and for collective
//! or per-particle dephasing during the twisting stages.  The optimum over
//! the signal direction `n` and measurement direction `m` is the largest
//! singular value of `M Q^{-1/2}`.
//!
//! The crate is organised around that pipeline:
//!
//! - [`protocol`]: parameter types (particle number, twisting strengths,
//!   dephasing strengths, directions, sweep grids).
//! - [`moments`]: the closed-form moments `M`, `Q` and the mean spin vector,
//!   including all dephasing damping factors.
//! - [`optimizer`]: direction optimization via a dependency-free 3x3 SVD,
//!   sensitivity landscapes, protocol classification, local maxima, and
//!   power-law scaling fits.
//! - [`oracle`]: exact Dicke-basis and full product-space state evolution
//!   used as ground truth for every closed form in the crate.
//! - [`qfi`]: quantum Fisher information bounds (closed-form and spectral)
//!   and quantum Cramer-Rao comparisons.
//! - [`wigner`]: spherical Wigner functions via an orthonormal multipole
//!   expansion, and the overlap identity behind the over-un-twisting
//!   enhancement mechanism.

pub mod cmat;
pub mod fullspace;
pub mod linalg;
pub mod moments;
pub mod numeric;
pub mod optimizer;
pub mod oracle;
pub mod protocol;
pub mod qfi;
pub mod sphere;
pub mod wigner;

pub use moments::{moment_matrices, scalar_coefficients, MomentMatrices, ScalarCoefficients};
pub use optimizer::{
    classify, find_local_maxima, fit_scaling, landscape, nu_optimized_slice, sensitivity,
    LandscapeGrid, LocalMaximum, OptimizedSensitivity, ProtocolClass, ScalingFit,
};
pub use protocol::{make_grid, Direction, NoiseModel, ParameterGrid, ProtocolPoint};

/// Errors shared by all modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eig:e}, scale {scale:e})")]
    NotPositiveSemiDefinite { min_eig: f64, scale: f64 },

    #[error("degenerate measurement: zero variance along the measurement axis")]
    DegenerateMeasurement,

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
