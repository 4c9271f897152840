//! Analytic models of the three-phase inverting buck-boost converter:
//! steady-state relations, modulation synthesis, semiconductor losses and
//! thermal chain, and component sizing tools.

pub mod converter;
pub mod design;
pub mod error;
pub mod loss_thermal;
pub mod modulation;

pub use converter::{ConverterParams, OperatingPoint};
pub use error::{CoreError, Result};
