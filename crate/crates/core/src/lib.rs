pub mod baseline;
pub mod certify;
#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod qpsolve;
pub mod mnistreg;
pub mod model;
pub mod relax;
pub mod rng;
pub mod sweep;

pub use error::{Error, Result};
