//! Numerical toolkit for rotational catenoids of prescribed mean curvature.

pub mod error;
pub mod halfspace;
pub mod asymptotics;
pub mod comparison;
pub mod ode;
pub mod prescribed;
pub mod profile;

pub use error::{Error, Result};
