//! Numerical construction of unstable eigenvalues of the Rayleigh equation
//! `-phi'' + alpha^2 phi + U''/(U - c) phi = 0` on `(-1, 1)` near a neutral
//! mode, plus the inner/outer gluing experiment for thin shear layers.

pub mod discretization;
pub mod dispersion;
pub mod error;
pub mod lyapunov_schmidt;
pub mod neutral_modes;
pub mod output;
pub mod profiles;
pub mod singular_limits;
pub mod validate;
pub mod vortex_sheet;

pub use error::{Error, Result};
