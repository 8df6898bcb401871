//! Tail functions, distributions and the reference catalog.

pub mod catalog;
mod distribution;
pub mod expr;
pub mod special;
pub mod specfile;
mod tail;

pub use catalog::{catalog, CatalogEntry};
pub use distribution::{Distribution, Sampler};
pub use tail::{TailFunction, Transform};
