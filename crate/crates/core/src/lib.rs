//! Error exponents, entropic duality and operational duality for classical
//! source coding with quantum side information and constant-composition
//! classical-quantum channel coding.
//!
//! All logarithms are base 2.

pub mod codes;
pub mod cqtypes;
pub mod divergence;
pub mod duality;
pub mod exponents;
pub mod linalg;
