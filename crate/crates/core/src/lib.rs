//! Acoustic tendon-load monitoring in software: a frequency-domain
//! acoustic model of a tendon inside a muscle phantom, the measurement
//! signal chain, synthetic tensile experiments and stress-acoustic
//! damage analysis.

pub mod analysis;
pub mod dsp;
pub mod error;
pub mod io;
pub mod mechanics;
pub mod phantom;
pub mod solver;
pub mod synthlab;

pub use error::{Error, Result};
