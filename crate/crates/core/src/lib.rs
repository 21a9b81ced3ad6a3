//! Pseudo-spectral computation of ground states for the nonlinear fractional
//! Schrödinger equation
//!
//! ```text
//!     (-Delta)^s u + V(x) u = f(x, u)    on R^N, 0 < s < 1, N in {1, 2},
//! ```
//!
//! approximated on a periodic box, together with numerical verification of
//! the variational structure: Nehari-manifold projection and levels, the
//! Pohozaev identity, polynomial tail decay, fractional Sobolev inequality
//! constants, cutoff/commutator behavior, and standing-wave dynamics under
//! the time-dependent equation.
//!
//! The core is generic over the floating-point scalar through [`Real`];
//! concrete `f64` aliases are exported at the crate root. See the `cli`
//! module (and the `fracground` binary) for the experiment front end.

pub mod error;
pub mod scalar;

mod fft;

pub mod cli;
pub mod config;
pub mod energy;
pub mod evolve;
pub mod fraclap;
pub mod grid;
pub mod model;
pub mod nehari;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default-precision aliases; the CLI and acceptance tolerances assume these.
pub type Grid64 = grid::Grid<f64>;
pub type Field64 = grid::Field<f64>;
pub type SpectralField64 = grid::SpectralField<f64>;
