//! Generalized treatment policies under unmeasured confounding: tilted
//! target laws, Q-policy couplings, sharp sensitivity bounds, and cross-fit
//! one-step estimators of those bounds.

pub mod bounds;
pub mod coupling;
pub mod data;
pub mod error;
pub mod estimators;
pub mod nuisance;
pub mod oracle;
pub mod quad;
pub mod sim;
pub mod tilt;

pub use error::{Error, ErrorKind, Result};
