pub mod error;
pub mod evt;
pub mod classify;
pub mod funcmodel;
pub mod hazard;
pub mod inverses;
pub mod numlimit;
pub mod quad;
pub mod represent;

pub use error::{Error, Result};
