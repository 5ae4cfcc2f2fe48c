//! Exact desk-scale laboratory for extracting provers from black-box
//! zero-knowledge simulators run against hash-function verifiers.
//!
//! Everything numeric is generic over [`Real`]; the aliases at the crate root
//! fix the scalar to `f64`.

pub mod error;
pub mod extract;
pub mod fieldhash;
pub mod protocols;
pub mod qcore;
pub mod scalar;
pub mod searchlab;

pub use error::{Error, Result};
pub use fieldhash::{enumerate_family, eval_hash, field_mul, sample_hash, FieldElement, HashFamily, HashFunction};
pub use qcore::{FunctionOracle, Step};
pub use scalar::{Complex, Real};

pub type StateVector = qcore::StateVector<f64>;
pub type DensityMatrix = qcore::DensityMatrix<f64>;
pub type QuantumPredicate = qcore::QuantumPredicate<f64>;
pub type QueryAlgorithm = qcore::QueryAlgorithm<f64>;
