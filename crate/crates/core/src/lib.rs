//! Exact and high-precision tools for degree-two L-functions and their linear twists.

pub mod bernoulli;
pub mod error;
pub mod fe_core;
pub mod number;
pub mod poly;
pub mod qpoly;
pub mod report;
pub mod special;
pub mod transform;
pub mod twist;

pub use error::{Error, Result};
