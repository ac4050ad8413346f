//! Kohn Laplacian kernels on quadric CR submanifolds of `ℂⁿ × ℂᵐ`.
//!
//! The crate is organised bottom-up:
//!
//! * [`levi_spectral`]: the vector-valued Levi form, its directional
//!   eigen-decomposition and the minor determinants that change basis
//!   between `dz̄^K` and the eigen-covectors `dZ̄(z, α)^L`.
//! * [`classifier`]: signatures, solvability / hypoellipticity per form
//!   degree, the sign cones `Γ_L` and the twist signs `ε`.
//! * [`quadrature`]: double-exponential and Gauss–Kronrod integrators.
//! * [`green`]: the Green and Szegő kernels as `(0,q)`-form coefficients.
//! * [`transformed_kernels`]: Fourier-side heat and Szegő kernels and the
//!   checks that tie them back to [`green`].
//! * [`closed_forms`]: presets and explicit kernels for special quadrics.
//! * [`verify`]: the named checks exposed by the command-line front end.

pub mod classifier;
pub mod closed_forms;
pub mod error;
pub mod green;
pub mod levi_spectral;
pub mod linalg;
pub mod quadrature;
mod special;
pub mod transformed_kernels;
pub mod verify;

pub use error::{Error, Result};
pub use levi_spectral::{MultiIndex, QuadricForm, SpectralData};
pub use num_complex::Complex64;
