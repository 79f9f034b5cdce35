//! Numerical toolkit for Orlicz-type Hardy and Bergman spaces on the upper half-plane:
//! growth-function calculus, quadrature, Carleson boxes, maximal operators, Luxembourg
//! norms, Carleson testing conditions and multiplier classification.

pub mod carleson;
pub mod growth;
pub mod maximal;
pub mod measure;
pub mod multipliers;
pub(crate) mod literal;
pub mod numerics;
pub mod scan;
pub mod spaces;

pub use literal::ParseError;
