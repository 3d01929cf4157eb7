//! Forward and inverse solvers for the half-line Schrödinger operator
//! `-d²/dx² + q(x)` with a Dirichlet condition at `x = 0`.
//!
//! The forward map simulates the boundary response `r(t)` of a potential
//! `q` through the associated wave equation. The inverse solvers recover
//! `q` on `[0, T]` from `r` on `[0, 2T]` by several routes:
//!
//! * the boundary-control (Krein-type) integral equations ([`krein`]),
//! * Remling's integral equations driven by the A-amplitude ([`remling`]),
//! * local and classical Gelfand-Levitan equations ([`gl`]),
//! * the Simon A-amplitude flow ([`simon`]).
//!
//! The [`spectral`] module computes Dirichlet eigenvalue/weight pairs of
//! the finite-interval problem, the spectral representation of the
//! connecting kernel, and the Titchmarsh-Weyl m-function, which
//! cross-validate the dynamical quantities.
//!
//! All functions live on uniform grids; integral operators are
//! discretized by the Nyström method with trapezoid weights.

pub mod connecting;
mod error;
pub mod forward;
pub mod gl;
pub mod goursat;
pub mod grid;
pub mod io;
pub mod krein;
pub mod remling;
pub mod simon;
pub mod spectral;

pub use connecting::{build_connecting_kernel, build_p, ConnectingKernel, PositivityReport};
pub use error::{Error, Result};
pub use forward::{control_invert, response_function, wave_solve, Wavefield};
pub use goursat::{goursat_fd_oracle, solve_goursat_picard, KernelOrientation, TriangularKernel};
pub use grid::{PotentialSample, ResponseSample, UniformGrid};
pub use krein::{recover_q_bc, solve_krein, KreinSolution, KreinVariant, RecoveryResult};
pub use spectral::{dirichlet_eigs, m_function, MFunctionSample, SpectralData};
