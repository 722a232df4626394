//! Density-matrix simulation of Bell-pair distillation under noise.
//!
//! Qubit 0 is the most significant bit of a basis index. Matrices are dense
//! and row-major; registers of up to [`densop::MAX_QUBITS`] qubits are handled.

pub mod analytic;
pub mod channels;
pub mod circuit;
pub mod device;
pub mod densop;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod par;
pub mod pauli;
pub mod protocols;
pub mod sweep;

pub use error::{Error, Result};
pub use par::Execution;
