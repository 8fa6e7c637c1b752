//! Gaussian-beam lens transforms, fiber mode matching, two-photon OAM mode
//! spectra from down-conversion, and waist estimation from lens-scan count
//! rates.
//!
//! Lengths are millimetres throughout; wavelengths are converted from
//! nanometres at the boundary with [`beam_optics::nm_to_mm`].

pub mod beam_optics;
pub mod error;
pub mod golden;
pub mod lm;
pub mod modes_coupling;
pub mod quadrature;
pub mod scan_estimation;
pub mod spdc_spectrum;
pub mod special;

pub use error::{Error, Result};
