//! Gate- and temperature-driven response of superconducting resonators.
//!
//! - [`specfun`]: scaled order-zero modified Bessel functions
//! - [`mattis_bardeen`]: conductivity ratios and thermal quasiparticle density
//! - [`resonator`]: frequency/loss shifts, effective temperature, recombination times
//! - [`dynamics`]: pulsed-readout simulator and sideband model
//! - [`fitting`]: Levenberg-Marquardt engine and the circle, Lorentzian,
//!   exponential and Mattis-Bardeen fitters
//! - [`noise`]: seeded noise shared by the generators

pub mod dynamics;
pub mod error;
pub mod fitting;
pub mod mattis_bardeen;
pub mod noise;
pub mod resonator;
pub mod specfun;

pub use error::{Error, Result};
