//! Switched time-domain simulation and closed-loop control of the
//! three-phase inverting buck-boost converter.

pub mod circuit;
pub mod control;
pub mod error;
pub mod kpi;
pub mod scenario;

pub use circuit::{run, Circuit, CircuitState, Driver, Topology, Trace};
pub use error::{Result, SimError};
pub use kpi::{trace_kpis, SimKpis};
