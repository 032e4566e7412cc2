//! Numerical laboratory for quantization-theoretic identities on explicit
//! Kähler manifolds: curvature from potentials, Chern–Weil and Todd
//! densities, Bergman kernels and their large-k expansion, Toeplitz and
//! Kostant–Souriau operators, Z-critical densities and flows toward
//! constant-density metrics.
//!
//! See [`conventions`] for every normalization choice.

pub mod asymptotics;
pub mod charforms;
pub mod config;
pub mod conventions;
pub mod curvature;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod functions;
pub mod jet;
pub mod model;
pub mod quadrature;
pub mod quantization;
pub mod report;

pub use error::{Error, Result};
pub use model::{KahlerModel, ScalarField};
