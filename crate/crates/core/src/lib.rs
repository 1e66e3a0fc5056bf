pub mod cli;
pub mod continuity;
pub mod error;
pub mod format;
pub mod kernels;
pub mod marginals;
pub mod orthopoly;
pub mod quadrature;
pub mod simulate;

pub use error::{Result, SmprError};
pub use marginals::{Family, MarginalSpec, MomentSummary, Support};
