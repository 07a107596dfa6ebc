pub mod audits;
pub mod constitutive;
pub mod error;
pub mod galerkin;
pub mod scenario;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
