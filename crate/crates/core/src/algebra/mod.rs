//! Exact holonomy-algebra engine: polynomial vector fields on the unit
//! sphere over the rationals.

pub mod field;
pub mod formulas;
pub mod generate;
pub mod linalg;
pub mod poly;

pub use field::{lie_bracket, SphereVectorField};
pub use formulas::ModelParams;
pub use generate::{
    density_certificate, generate_ihol_basis, monomial_module_dimension, DensityCertificate,
    GradedBasis,
};
pub use poly::SpherePolynomial;
