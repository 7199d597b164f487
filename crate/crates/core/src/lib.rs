//! Radial kinetic wave equation toolkit: interaction integrals, collision
//! operators, a time integrator for the radial equation, Monte Carlo
//! reduction checks, Weyl-law spectra and a random-phase cubic wave
//! simulator on the torus.

pub mod collision;
pub mod error;
pub mod interaction;
pub mod microsim;
pub mod quadrature;
pub mod reduction;
pub mod rng;
pub mod solver;
pub mod spectrum_synth;
pub mod specfun;
pub mod stats;

pub use error::{KwrError, Result};
pub use specfun::Dimension;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
