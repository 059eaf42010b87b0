//! Cross-impact modeling for universes of underlyings and derivatives.
//!
//! The crate builds multivariate Kyle impact matrices from return and
//! order-flow covariances, prices derivatives and their sensitivities under
//! a Black-Scholes-with-volatility-factors model, simulates impacted price
//! dynamics, estimates the covariance observables from binned bar data, and
//! scores competing cross-impact models.

pub mod error;
pub mod instruments;
pub mod kyle;
pub mod linalg;
pub mod models;

pub use error::{Error, Result};
