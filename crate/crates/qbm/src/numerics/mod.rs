//! Numerical building blocks shared by the physics modules.

pub mod bessel;
pub mod fit;
pub mod linalg;
pub mod quad;
pub mod sphere;
