#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod coefficients;
pub mod config;
pub mod counterexample1d;
pub mod drift;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod montecarlo;
pub mod params;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod transform;

pub use error::{Error, Result};
