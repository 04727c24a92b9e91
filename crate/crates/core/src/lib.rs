//! Exceptional points of two driven, coupled, damped oscillators and the
//! Fano-like line shapes they imprint on an effective two-channel T-matrix.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: polynomial roots and small dense complex matrices.
//! - [`model`]: the 4x4 system matrix, secular determinant, stationary response.
//! - [`epfinder`]: Newton search for coalescing eigenfrequencies in `(ω, f, g)`.
//! - [`reduction`]: projection onto an effective 2x2 model and trajectories.
//! - [`scattering`]: pole-decomposed Green's function, T-matrix, cross sections.
//! - [`timedomain`]: RK4 integration of the equations of motion.

pub mod constants;
pub mod epfinder;
pub mod linalg;
pub mod model;
pub mod reduction;
pub mod scattering;
pub mod timedomain;

pub use epfinder::{find_ep, scan_seeds, EpError, EpSeed, ExceptionalPoint};
pub use linalg::{Mat2, Mat4, C64};
pub use model::{OscillatorParams, StateVector};
pub use reduction::{EffectiveModel, Gauge, Trajectory};
pub use scattering::{CrossSectionSample, PoleDecomposition};


