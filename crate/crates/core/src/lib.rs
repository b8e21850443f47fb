pub mod bessel;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod pool;
pub mod power;
pub mod propagator;
pub mod protocol;
pub mod quadrature;
pub mod resonance;
pub mod scenario;

pub use error::{Error, Result};
