//! Sharp Sobolev trace constants, small-ε expansions of boundary-concentrating
//! test functions, and a discrete p-Laplacian Steklov solver with an
//! optimal-hole driver.
//!
//! The closed-form layers ([`gamma`], [`extremal`], [`expansion`]) are
//! generic over [`Real`]; the numerical layers work in `f64`.

pub mod error;
pub mod expansion;
pub mod extremal;
pub mod fit;
pub mod fem;
pub mod gamma;
pub mod oracle;
pub mod quadrature;
pub mod scalar;
pub mod shape;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` problem parameters.
pub type Params = extremal::ProblemParams<f64>;
/// `f64` boundary geometry.
pub type Geometry = expansion::BoundaryGeometry<f64>;
/// `f64` coefficient record.
pub type Coefficients = expansion::ExpansionCoefficients<f64>;
